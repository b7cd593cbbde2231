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

#include "ppoff/simulator.h"

#include <gtest/gtest.h>

#include "json.hpp"
#include <numeric>
#include <sstream>

#include "ppoff/builders.h"

namespace ppoff {
namespace {

std::string Csv(const SimTrace& t) {
  std::ostringstream os;
  WriteTraceCsv(os, t);
  return os.str();
}

OffloadPlan HalfPlan(const Schedule& po, int d, int v, const Rational& k) {
  PassCosts u = PassCosts::Unit();
  return PlanSlots(po, SelectOffloadStages(POBlock(d, v, u), (v + 1) / 2), k * u.total());
}

TEST(SimulatorTest, NoOffloadReproducesTheSchedule) {
  PassCosts u = PassCosts::Unit();
  for (int d : {1, 2, 4})
    for (int v : {1, 2}) {
      for (const Schedule& s : {Build1F1B(d, v, 2 * d, u), BuildGIS(d, v, 2 * d, u), BuildPO(d, v, 2 * d, u)}) {
        SimTrace t = Simulate(s, nullptr, u, HardwareSpec{});
        EXPECT_EQ(t.timed.device_passes, s.device_passes) << s.name;
        EXPECT_EQ(t.makespan, s.Makespan());
        EXPECT_TRUE(t.transfers.empty());
        for (int dev = 0; dev < d; ++dev)
          EXPECT_EQ(t.device_memory.PeakCount(dev), BuildMemoryTimeline(s, {}).PeakCount(dev));
      }
    }
}

TEST(SimulatorTest, WorkIsConservedAndBubbleIsTheRest) {
  PassCosts u = PassCosts::Unit();
  Schedule po = BuildPO(4, 2, 16, u);
  OffloadPlan plan = HalfPlan(po, 4, 2, 2);
  SimTrace t = Simulate(po, &plan, u, HardwareSpec{});
  std::vector<Time> bubbles = BubbleTime(t);
  for (int dev = 0; dev < 4; ++dev) {
    Time work = 0;
    for (const Pass& p : po.device_passes[dev]) work += p.duration;
    EXPECT_EQ(t.busy[dev], work);
    EXPECT_EQ(bubbles[dev], t.makespan - work);
    EXPECT_EQ(t.timed.device_passes[dev].size(), po.device_passes[dev].size());
  }
  EXPECT_TRUE(Validate(t.timed, u).empty());
}

TEST(SimulatorTest, Deterministic) {
  PassCosts u = PassCosts::Unit();
  Schedule po = BuildPO(4, 4, 16, u);
  OffloadPlan plan = HalfPlan(po, 4, 4, Rational(3, 4));
  SimOptions o;
  o.contention = ContentionMode::kSwitchHalving;
  EXPECT_EQ(Csv(Simulate(po, &plan, u, HardwareSpec{}, o)), Csv(Simulate(po, &plan, u, HardwareSpec{}, o)));
}

TEST(SimulatorTest, TransfersRespectDataAndPlan) {
  PassCosts u = PassCosts::Unit();
  Schedule po = BuildPO(4, 2, 16, u);
  OffloadPlan plan = HalfPlan(po, 4, 2, 1);
  SimTrace t = Simulate(po, &plan, u, HardwareSpec{});
  PassIndex idx(t.timed);
  ASSERT_EQ(t.transfers.size(), plan.num_transfers());
  for (const TransferRecord& r : t.transfers) {
    EXPECT_GE(r.end - r.start, plan.slot_width);
    const Pass* f = idx.Find(PassKind::kForward, r.stage, r.microbatch);
    const Pass* b = idx.Find(PassKind::kBackward, r.stage, r.microbatch);
    if (r.dir == Direction::kD2H) EXPECT_GE(r.start, f->end());
    if (r.dir == Direction::kH2D) EXPECT_LE(r.end, b->start);
  }
}

TEST(SimulatorTest, SmallRoundTripIsFree) {
  PassCosts u = PassCosts::Unit();
  for (int d : {2, 4, 8}) {
    Schedule po = BuildPO(d, 2, 4 * d, u);
    OffloadPlan plan = HalfPlan(po, d, 2, Rational(1, 2));
    SimTrace t = Simulate(po, &plan, u, HardwareSpec{});
    EXPECT_EQ(t.makespan, po.Makespan()) << d;
    EXPECT_LT(PeakMemory(t).max_count, BuildMemoryTimeline(po, {}).PeakCount(0)) << d;
  }
}

TEST(SimulatorTest, ContentionNeverHelps) {
  PassCosts u = PassCosts::Unit();
  for (int d : {2, 4})
    for (Rational k : {Rational(1, 2), Rational(1), Rational(2)}) {
      Schedule po = BuildPO(d, 4, 4 * d, u);
      OffloadPlan plan = HalfPlan(po, d, 4, k);
      SimOptions halving;
      halving.contention = ContentionMode::kSwitchHalving;
      SimOptions dual;
      dual.streams = StreamMode::kDual;
      Time base = Simulate(po, &plan, u, HardwareSpec{}).makespan;
      EXPECT_GE(Simulate(po, &plan, u, HardwareSpec{}, halving).makespan, base);
      EXPECT_LE(Simulate(po, &plan, u, HardwareSpec{}, dual).makespan, base);
      EXPECT_GE(base, po.Makespan());
    }
}

TEST(SimulatorTest, LongerPassNeverShortensMakespan) {
  PassCosts u = PassCosts::Unit();
  Schedule po = BuildPO(2, 2, 8, u);
  OffloadPlan plan = HalfPlan(po, 2, 2, 1);
  Time base = Simulate(po, &plan, u, HardwareSpec{}).makespan;
  for (int dev = 0; dev < 2; ++dev)
    for (std::size_t i = 0; i < po.device_passes[dev].size(); i += 3) {
      Schedule slow = po;
      slow.device_passes[dev][i].duration += Rational(1, 2);
      EXPECT_GE(Simulate(slow, &plan, u, HardwareSpec{}).makespan, base) << dev << " " << i;
    }
}

TEST(SimulatorTest, HostPeakMatchesSweepOnOneNode) {
  PassCosts u = PassCosts::Unit();
  Schedule po = BuildPO(4, 2, 16, u);
  OffloadPlan plan = HalfPlan(po, 4, 2, Rational(1, 2));
  SimTrace t = Simulate(po, &plan, u, HardwareSpec{});
  ASSERT_FALSE(t.host.empty());
  std::int64_t best = 0;
  for (const HostResidency& at : t.host) {
    std::int64_t c = 0;
    for (const HostResidency& h : t.host)
      if (h.begin <= at.begin && at.begin < h.end) c += h.bytes;
    best = std::max(best, c);
  }
  EXPECT_EQ(HostPeakMemory(t, ContiguousAssignment(4, 1)), (std::vector<std::int64_t>{best}));
  std::vector<std::int64_t> two = HostPeakMemory(t, AssignRanksToNodes(4, 2));
  EXPECT_EQ(two.size(), 2u);
  for (std::int64_t p : two) EXPECT_LE(p, best);
}

TEST(SimulatorTest, SwitchScenarioDisciplines) {
  SwitchScenario sc = SwitchScenario::Default();
  SwitchResult sync = SimulateSwitchScenario(sc, SwitchDiscipline::kSyncInterleaved);
  SwitchResult par = SimulateSwitchScenario(sc, SwitchDiscipline::kParallel);
  EXPECT_EQ(sync.same_direction_overlap, Time(0));
  EXPECT_GT(par.same_direction_overlap, Time(0));
  EXPECT_LE(sync.makespan, par.makespan);
  // Without contention nobody waits on bandwidth, so parallel is no slower.
  SwitchResult free_par = SimulateSwitchScenario(sc, SwitchDiscipline::kParallel, ContentionMode::kNone);
  EXPECT_LE(free_par.makespan, par.makespan);
}

TEST(SimulatorTest, SummaryAndCsvAreWellFormed) {
  PassCosts u = PassCosts::Unit();
  Schedule po = BuildPO(2, 2, 8, u);
  OffloadPlan plan = HalfPlan(po, 2, 2, 1);
  SimTrace t = Simulate(po, &plan, u, HardwareSpec{});
  nlohmann::json j = nlohmann::json::parse(TraceSummaryJson(t));
  EXPECT_TRUE(j.is_object());
  std::string csv = Csv(t);
  std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
  EXPECT_EQ(lines, 1 + po.num_passes() + t.transfers.size());
}

}  // namespace
}  // namespace ppoff
