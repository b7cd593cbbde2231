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

#ifndef PPOFF_OFFLOAD_H_
#define PPOFF_OFFLOAD_H_

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ppoff/cost_model.h"
#include "ppoff/schedule.h"

namespace ppoff {

enum class Direction { kD2H, kH2D };

struct Transfer {
  Direction dir = Direction::kD2H;
  int device = 0;
  int stage = 0;
  int microbatch = 0;
  Time start = 0;
  Time duration = 0;
  std::int64_t slot = 0;  // index on the device's slot grid; even = D2H, odd = H2D

  Time end() const { return start + duration; }
  bool operator==(const Transfer&) const = default;
};

struct DeviceStream {
  Time origin = 0;                  // start of slot 0
  std::vector<Transfer> transfers;  // sorted by slot
  bool operator==(const DeviceStream&) const = default;
};

struct StageMicrobatch {
  int stage = 0;
  int microbatch = 0;
  auto operator<=>(const StageMicrobatch&) const = default;
};

// Transfer `index` on `device` may not start before transfer
// `partner_index` on `partner` has finished.
struct SyncEdge {
  int device = 0;
  std::size_t index = 0;
  int partner = 0;
  std::size_t partner_index = 0;
  bool operator==(const SyncEdge&) const = default;
};

struct OffloadPlan {
  int d = 0;
  Time round_trip = 0;
  Time slot_width = 0;
  std::vector<std::vector<int>> offloaded_stages;  // global stages, per device
  std::vector<DeviceStream> streams;
  std::vector<StageMicrobatch> skipped;     // gap shorter than the round trip or off-grid
  std::vector<StageMicrobatch> infeasible;  // reload forced past its B
  std::vector<SyncEdge> sync_edges;
  bool synchronized = false;
  std::string notice;

  std::size_t num_transfers() const;
  // Nullptr when the pair is not planned in that direction.
  const Transfer* Find(Direction dir, int stage, int microbatch) const;
  bool operator==(const OffloadPlan&) const = default;
};

// The n device-local stages with the longest lifespans summed over devices;
// ties go to the lower local index. Result is sorted ascending.
std::vector<int> SelectOffloadStages(const BuildingBlock& block, int n);

// Lays a grid of alternating D2H / H2D slots, each round_trip / 2 wide, from
// the end of each device's first pass (or from `origins[device]`) and fills
// it: offloads left to right into the earliest free D2H slot after the F,
// reloads right to left into the latest free H2D slot before the B. Pairs
// whose F-end to B-start gap is below the round trip, or holds no aligned
// D2H + H2D slot pair, are skipped. A reload
// with no room before its B is put in the first free slot after its
// offload and reported in `infeasible`.
OffloadPlan PlanSlots(const Schedule& sched, const std::vector<int>& local_stages, const Time& round_trip,
                      const std::vector<std::optional<Time>>& origins = {});

// For each pair of devices sharing a switch, shifts the second device's slot
// grid by half a round trip so that one device offloads while the other
// reloads, re-plans it on that grid, and adds a precedence edge from each
// transfer to the partner's latest transfer planned to end before it.
// With devices_per_switch != 2 the plan is returned unchanged with a notice.
OffloadPlan ApplyTopologySync(const Schedule& sched, const OffloadPlan& plan, const HardwareSpec& hw);

// Total planned time during which two devices on one switch move data in the
// same direction.
Time PlannedSameDirectionOverlap(const OffloadPlan& plan, int devices_per_switch);

// OFFLOAD / RELOAD lines in the pass-line format plus '#' header lines.
void WritePlan(std::ostream& os, const OffloadPlan& plan);
std::string PlanToString(const OffloadPlan& plan);
// Reads the lines WritePlan emits; pass lines of other kinds are ignored.
OffloadPlan ParsePlan(std::istream& is);

struct HostBufferLayout {
  struct Placement {
    int bin = 0;
    std::int64_t offset = 0;
    bool operator==(const Placement&) const = default;
  };
  std::vector<std::int64_t> bins;        // power-of-two sizes
  std::vector<std::int64_t> sizes;       // tensor sizes, input order
  std::vector<Placement> placements;     // per tensor

  std::int64_t total() const;
  std::string ToJson() const;
};

std::int64_t NextPowerOfTwo(std::int64_t x);
// Sum of each tensor rounded up to a power of two on its own.
std::int64_t NaiveRoundUpTotal(const std::vector<std::int64_t>& sizes);

// Chooses at most three power-of-two bins with the smallest total (ties:
// fewer bins) that hold every tensor. Each candidate is tried with
// first-fit-decreasing, then with a node-limited exact search, so short lists
// get the optimum and long ones may settle for a larger candidate.
HostBufferLayout PackHostBins(const std::vector<std::int64_t>& sizes);

struct NodeAssignment {
  int num_nodes = 1;
  std::vector<int> node_of_rank;
  std::vector<int> Ranks(int node) const;
};

// Pairs rank i with rank d-1-i: ranks are taken in the order
// 0, d-1, 1, d-2, ... and dealt to nodes in consecutive runs of d/num_nodes.
NodeAssignment AssignRanksToNodes(int d, int num_nodes);
// Ranks 0..d/n-1 on node 0 and so on.
NodeAssignment ContiguousAssignment(int d, int num_nodes);

}  // namespace ppoff

#endif  // PPOFF_OFFLOAD_H_
