// Copyright 2026 The ppoff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Internal task engine shared by the schedule simulator and the switch
// micro-scenario.

#ifndef PPOFF_SRC_ENGINE_H_
#define PPOFF_SRC_ENGINE_H_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ppoff/rational.h"

namespace ppoff::engine {

struct Dep {
  int task = 0;
  bool on_end = true;  // otherwise satisfied when `task` starts
  Time lag = 0;
};

struct Task {
  int resource = 0;
  Time work = 0;
  std::optional<Time> release;
  bool transfer = false;  // transfers run at a contention-dependent rate
  int device = 0;
  int direction = 0;      // for transfers: 0 = D2H, 1 = H2D
  Time priority = 0;      // dispatch order on unordered resources
  std::vector<Dep> deps;
  std::string label;
};

struct Resource {
  // In-order resources run their `order` list strictly in sequence;
  // otherwise any ready task may go next, lowest priority first.
  bool in_order = true;
  std::vector<int> order;
  // Unordered resources only: tasks that may run here.
  std::vector<int> members;
};

struct RateEvent {
  Time time = 0;
  int task = 0;
  Rational rate = 1;
};

struct Result {
  std::vector<Time> start;
  std::vector<Time> end;
  std::vector<RateEvent> rate_changes;  // only rates below one are logged
};

// Given the indices of running transfers, returns their rates (0 < r <= 1).
using RateFn = std::function<std::vector<Rational>(const std::vector<int>& active)>;

// Throws Error(kDeadlock) with a dependency cycle when nothing can proceed.
Result Run(const std::vector<Task>& tasks, const std::vector<Resource>& resources, const RateFn& rates);

}  // namespace ppoff::engine

#endif  // PPOFF_SRC_ENGINE_H_
