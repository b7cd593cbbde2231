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

#ifndef PPOFF_SCHEDULE_H_
#define PPOFF_SCHEDULE_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ppoff/cost_model.h"
#include "ppoff/rational.h"

namespace ppoff {

enum class PassKind { kForward, kBackward, kWeight, kOffload, kReload };

// "F", "B", "W", "OFFLOAD", "RELOAD".
const char* PassKindName(PassKind kind);
// Inverse of PassKindName; nullopt for unknown text.
std::optional<PassKind> ParsePassKind(const std::string& text);

struct Pass {
  PassKind kind = PassKind::kForward;
  int device = 0;
  int stage = 0;       // global pipeline stage in [0, num_stages)
  int microbatch = 0;  // in [0, m)
  Time start = 0;
  Time duration = 0;

  Time end() const { return start + duration; }
  bool operator==(const Pass&) const = default;
};

struct PassKey {
  PassKind kind = PassKind::kForward;
  int stage = 0;
  int microbatch = 0;
  bool operator==(const PassKey&) const = default;
};

struct PassKeyHash {
  std::size_t operator()(const PassKey& k) const noexcept {
    return (static_cast<std::size_t>(k.stage) * 1000003u + static_cast<std::size_t>(k.microbatch)) *
               8u +
           static_cast<std::size_t>(k.kind);
  }
};

enum class Composition { kInterleaving, kUniformRepeat };

// stage s lives on device s mod d (the usual round-robin chunk placement).
std::vector<int> RoundRobinPlacement(int d, int v);

// Per-device ordered pass lists for all microbatches of one iteration.
struct Schedule {
  std::string name;
  int d = 1;
  int v = 1;
  int m = 0;
  std::vector<int> placement;     // stage -> device
  std::vector<int> stage_weight;  // activation units held by one (stage, microbatch)
  bool split_backward = false;
  Composition composition = Composition::kInterleaving;
  int group = 0;      // g of the interleaving; 0 when not applicable
  Time interval = 0;  // repeat interval of a uniform repeat; 0 otherwise
  std::vector<std::vector<Pass>> device_passes;

  int num_stages() const { return static_cast<int>(placement.size()); }
  // Position of `stage` among the stages hosted on its device, in stage order.
  int LocalIndex(int stage) const;
  // Global stages hosted on `device`, in local-index order.
  std::vector<int> DeviceStages(int device) const;
  std::size_t num_passes() const;
  Time Makespan() const;

  bool operator==(const Schedule&) const = default;
};

// Lookup from (kind, stage, microbatch) to a pass of a schedule.
class PassIndex {
 public:
  explicit PassIndex(const Schedule& sched);
  const Pass* Find(PassKind kind, int stage, int microbatch) const;

 private:
  std::unordered_map<PassKey, const Pass*, PassKeyHash> map_;
};

// Relative placement of one microbatch's passes over all stages.
struct BuildingBlock {
  int d = 1;
  int v = 1;
  std::vector<int> placement;
  std::vector<Time> forward;   // F start offset per stage
  std::vector<Time> backward;  // B start offset per stage
  std::vector<Time> weight;    // W start offset per stage; empty without split backward
  Time forward_duration = 1;
  Time backward_duration = 1;
  Time weight_duration = 0;
  Time comm = 0;

  int num_stages() const { return static_cast<int>(placement.size()); }
  bool split() const { return !weight.empty(); }
  // Latest pass end in the block.
  Time Span() const;
};

// B end minus F start of `stage`.
Time Lifespan(const BuildingBlock& block, int stage);

// Empty when the block is well formed: per stage F < B < W in time, F
// offsets non-decreasing and B offsets non-increasing along the chain,
// T_comm respected between devices and passes on one device disjoint.
std::vector<std::string> CheckBlock(const BuildingBlock& block);

// Offsets of `microbatch`'s passes relative to its stage-0 F start.
BuildingBlock ExtractBlock(const Schedule& sched, int microbatch, Time comm = 0);

// The relative pattern shared by the most microbatches of `sched` (the
// steady-state block); ties go to the pattern seen first.
BuildingBlock MostFrequentBlock(const Schedule& sched, Time comm = 0);

enum class ViolationKind { kDependency, kOverlap, kMissing, kDuplicate, kPlacement };

struct Violation {
  ViolationKind kind;
  std::string message;
};

// Violations are data: an empty result means the schedule is well formed.
std::vector<Violation> Validate(const Schedule& sched, const PassCosts& costs);

// Re-times every pass to its earliest start given the per-device order,
// the chain dependencies (plus costs.comm between devices) and optional
// release times. Throws Error(kDeadlock) if the order is unsatisfiable.
void RetimeAsap(Schedule& sched, const Time& comm,
                const std::function<Time(const Pass&)>& release = nullptr);

// Piecewise-constant activation residency; each point holds from its time
// until the next point.
struct MemoryPoint {
  Time time = 0;
  std::int64_t count = 0;                // stage-activation units resident
  std::vector<std::int64_t> per_stage;   // by device-local stage index
};

struct DeviceMemory {
  std::vector<int> stages;  // global stage of each local index
  std::vector<MemoryPoint> points;

  std::int64_t Peak() const;
  // Earliest point reaching Peak(); points.end() is never returned.
  const MemoryPoint& PeakPoint() const;
  // Peak after dropping the activations of the listed local stages.
  std::int64_t PeakExcluding(const std::vector<int>& local_stages) const;
  // Time integral of the count.
  Time Area() const;
};

struct MemoryTimeline {
  std::int64_t bytes_per_unit = 0;
  std::int64_t overhead_bytes = 0;  // constant per-device weight-gradient buffer
  std::vector<DeviceMemory> devices;

  std::int64_t PeakCount(int device) const { return devices.at(device).Peak(); }
  std::int64_t PeakBytes(int device) const {
    return PeakCount(device) * bytes_per_unit + overhead_bytes;
  }
  int PeakDevice() const;
};

// One resident interval of a (stage, microbatch) activation.
struct Residency {
  int device = 0;
  int stage = 0;
  int weight = 1;
  Time begin = 0;
  Time end = 0;
};

// Builds a timeline from explicit residency intervals. Releases at an
// instant are applied before allocations at the same instant.
MemoryTimeline BuildTimeline(const Schedule& sched, const std::vector<Residency>& intervals,
                             std::int64_t bytes_per_unit);

// One activation per (stage, microbatch), resident from F start to B end.
// W holds nothing. Bytes per unit are L · ActivationBytesPerLayer(recompute).
MemoryTimeline BuildMemoryTimeline(const Schedule& sched, const ModelSpec& model,
                                   bool recompute = true, std::int64_t overhead_bytes = 0);

// Decomposition of the device peak by local stage at the earliest peak instant.
std::vector<std::int64_t> StageContributionAtPeak(const MemoryTimeline& tl, int device);

// Line format: one pass per line, `device stage microbatch kind start
// duration`, times as exact rationals. Header lines start with '#'.
void WriteSchedule(std::ostream& os, const Schedule& sched);
std::string ScheduleToString(const Schedule& sched);
// Throws Error(kParse) naming the offending line.
Schedule ParseSchedule(std::istream& is);
Schedule ParseScheduleString(const std::string& text);

}  // namespace ppoff

#endif  // PPOFF_SCHEDULE_H_
