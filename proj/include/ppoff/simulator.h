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

#ifndef PPOFF_SIMULATOR_H_
#define PPOFF_SIMULATOR_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ppoff/cost_model.h"
#include "ppoff/offload.h"
#include "ppoff/schedule.h"

namespace ppoff {

enum class ContentionMode {
  kNone,
  // A transfer's rate is divided by the number of transfers running on its
  // device and by the number of devices on its switch moving data in the
  // same direction.
  kSwitchHalving,
};

enum class StreamMode {
  kSingle,  // one transfer stream per device
  kDual,    // separate D2H and H2D streams (comparison only)
};

struct SimOptions {
  ContentionMode contention = ContentionMode::kNone;
  StreamMode streams = StreamMode::kSingle;
  bool use_sync_edges = true;
  ModelSpec model;  // sizes the byte columns
};

struct TransferRecord {
  Direction dir = Direction::kD2H;
  int device = 0;
  int stage = 0;
  int microbatch = 0;
  Time planned_start = 0;
  Time start = 0;
  Time end = 0;
};

struct ContentionEvent {
  Time time = 0;
  int device = 0;
  Direction dir = Direction::kD2H;
  Rational rate = 1;
};

struct HostResidency {
  int device = 0;
  std::int64_t bytes = 0;
  Time begin = 0;
  Time end = 0;
};

struct SimTrace {
  Schedule timed;  // the input schedule with simulated start times
  std::vector<TransferRecord> transfers;
  std::vector<Time> device_end;  // last compute end per device
  Time makespan = 0;             // last compute end over all devices
  std::vector<Time> busy;        // summed compute time per device
  MemoryTimeline device_memory;  // includes activations waiting on a transfer
  std::vector<HostResidency> host;
  std::vector<ContentionEvent> contention_events;
};

// Earliest-start execution of `sched` and optionally `plan`. Each transfer
// is released at its planned slot time measured from the compute pass that
// was running when the slot was planned, so the plan keeps its shape when
// compute is on time and slides with it otherwise. Throws Error(kDeadlock)
// naming a dependency cycle.
SimTrace Simulate(const Schedule& sched, const OffloadPlan* plan, const PassCosts& costs, const HardwareSpec& hw,
                  const SimOptions& options = {});

// Makespan minus busy compute time, per device.
std::vector<Time> BubbleTime(const SimTrace& trace);
// Bubble over makespan, per device.
std::vector<double> BubbleRate(const SimTrace& trace);

struct PeakReport {
  std::vector<std::int64_t> count;  // per device, stage-activation units
  std::vector<std::int64_t> bytes;
  int max_device = 0;
  std::int64_t max_count = 0;
  std::int64_t max_bytes = 0;
};
PeakReport PeakMemory(const SimTrace& trace);

// Highest simultaneous offloaded bytes per node.
std::vector<std::int64_t> HostPeakMemory(const SimTrace& trace, const NodeAssignment& assignment);

// Total simulated time during which two devices of one switch run transfers
// in the same direction.
Time SameDirectionOverlap(const SimTrace& trace, int devices_per_switch);

// Two devices on one switch, each alternating compute gaps with one offload
// and one reload per round.
enum class SwitchDiscipline {
  kParallel,         // both devices offload, then both reload
  kInterleaved,      // the second device reloads while the first offloads
  kSyncInterleaved,  // interleaved, each transfer waiting for the partner's previous one
  kDualStream,       // offload and reload on separate streams at once
};

const char* SwitchDisciplineName(SwitchDiscipline d);

struct SwitchScenario {
  int rounds = 16;
  Time transfer = 1;                      // one transfer at full bandwidth
  std::vector<std::vector<Time>> delays;  // [device][round] compute gap before the round
  // Deterministic default: gaps of 2 with a small per-round jitter.
  static SwitchScenario Default();
};

struct SwitchResult {
  Time makespan = 0;
  Time same_direction_overlap = 0;
};

SwitchResult SimulateSwitchScenario(const SwitchScenario& scenario, SwitchDiscipline discipline,
                                    ContentionMode contention = ContentionMode::kSwitchHalving);

// One pass or transfer per row: kind,device,stage,microbatch,start,end.
void WriteTraceCsv(std::ostream& os, const SimTrace& trace);
// Makespan, bubbles and peaks.
std::string TraceSummaryJson(const SimTrace& trace);

}  // namespace ppoff

#endif  // PPOFF_SIMULATOR_H_
