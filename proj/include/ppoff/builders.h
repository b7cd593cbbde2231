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

#ifndef PPOFF_BUILDERS_H_
#define PPOFF_BUILDERS_H_

#include <optional>
#include <string>

#include "ppoff/cost_model.h"
#include "ppoff/offload.h"
#include "ppoff/schedule.h"

namespace ppoff {

enum class ScheduleKind { kOneFOneB, kInterleaved1F1B, kGIS, kGISG, kGISH, kPO, kOneFOneBFullOffload };

// "1f1b", "1f1b-i", "gis", "gis-g", "gis-h", "po", "1f1b-offload".
const char* ScheduleKindName(ScheduleKind kind);
std::optional<ScheduleKind> ParseScheduleKind(const std::string& name);

// Test hook: shifts the warmup count of the split-backward builders.
struct BuilderOptions {
  int warmup_delta = 0;
};

// One stage per device holding all v layer groups: F lasts v*T_F, B lasts
// v*(T_B+T_W), and one (stage, microbatch) holds v activation units.
Schedule Build1F1B(int d, int v, int m, const PassCosts& costs);

// Interleaved 1F1B with warmup d(v-1) + 2(d-i) - 1 and unsplit backward.
Schedule BuildInterleaved1F1B(int d, int v, int m, const PassCosts& costs);

// Split backward, warmup d(v-1) + d - i.
Schedule BuildGIS(int d, int v, int m, const PassCosts& costs, const BuilderOptions& options = {});

// Split backward, groups of g microbatches, warmup g(v-1) + d - i.
Schedule BuildGISG(int d, int v, int m, int g, const PassCosts& costs, const BuilderOptions& options = {});

// BuildGISG with g = ceil(d/2).
Schedule BuildGISH(int d, int v, int m, const PassCosts& costs, const BuilderOptions& options = {});

// Steady-state block of the GIS-H schedule.
BuildingBlock GISHBlock(int d, int v, const PassCosts& costs);

// A collision-free block for repeating every v*(T_F+T_B+T_W): each device
// takes its phase from its first F, and the j-th F (B) of a device sits j
// cycles past that phase, with j unique modulo v per device and kind.
BuildingBlock POBlock(int d, int v, const PassCosts& costs);

// Uniform repeat of POBlock, then compacted to earliest starts in the same
// per-device order.
Schedule BuildPO(int d, int v, int m, const PassCosts& costs);

struct OffloadedSchedule {
  Schedule schedule;
  OffloadPlan plan;
};

// 1F1B (v = 1) with every stage planned for offload.
OffloadedSchedule Build1F1BFullOffload(int d, int m, const PassCosts& costs, const Time& round_trip);

// Dispatch by kind; g is used only by kGISG.
Schedule BuildSchedule(ScheduleKind kind, int d, int v, int m, int g, const PassCosts& costs,
                       const BuilderOptions& options = {});

}  // namespace ppoff

#endif  // PPOFF_BUILDERS_H_
