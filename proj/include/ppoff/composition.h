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

#ifndef PPOFF_COMPOSITION_H_
#define PPOFF_COMPOSITION_H_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ppoff/schedule.h"

namespace ppoff {

// Forward visiting order of one device: groups of g microbatches, each
// group swept over chunks 0..v-1. Entries are (chunk, microbatch). The last
// group may be short when g does not divide m.
std::vector<std::pair<int, int>> GroupedForwardOrder(int m, int v, int g);

struct InterleavedParams {
  std::string name;
  int d = 1;
  int v = 1;
  int m = 0;
  int g = 1;
  std::function<int(int rank)> warmup;  // forwards issued before the first B
  bool split_backward = true;
  Time forward = 1;
  Time backward = 1;
  Time weight = 1;
  Time comm = 0;
};

// Bi-level ordering on a round-robin placement: warmup forwards, then
// B [W] F triples while forwards remain, then the remaining B [W]. Times are
// the earliest consistent with that order.
Schedule ComposeInterleaved(const InterleavedParams& params);

// Block offsets of microbatch j shifted by j * interval, before any repair.
std::vector<Pass> UniformRepeatNominal(const BuildingBlock& block, int m, const Time& interval);

// Repeats `block` every `interval`. Passes are ordered per device by their
// nominal start (ties: lower microbatch, then F < B < W) and any collision is
// resolved by pushing the later pass right just enough. Throws
// Error(kInfeasibleInterval) when the interval is not positive or the total
// push exceeds m times the block span.
Schedule UniformRepeat(const BuildingBlock& block, int m, const Time& interval);

// Interleaving composition of `block`'s passes with group size g and the
// adjusted warmup g(v-1) + d - i. Throws Error(kInvalidG) unless
// ceil(d/2) <= g <= d.
Schedule InterleaveCompose(const BuildingBlock& block, int d, int v, int g, int m);

// Number of F passes before the first B in `device`'s order.
int WarmupForwards(const Schedule& sched, int device);

}  // namespace ppoff

#endif  // PPOFF_COMPOSITION_H_
