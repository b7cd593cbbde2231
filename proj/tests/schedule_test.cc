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

#include "ppoff/schedule.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "ppoff/builders.h"
#include "ppoff/error.h"

namespace ppoff {
namespace {

// One device, one stage, m=2, F F B B with unit durations.
Schedule Tiny() {
  Schedule s;
  s.name = "tiny";
  s.d = 1;
  s.v = 1;
  s.m = 2;
  s.placement = {0};
  s.stage_weight = {1};
  s.device_passes = {{
      {PassKind::kForward, 0, 0, 0, 0, 1},
      {PassKind::kForward, 0, 0, 1, 1, 1},
      {PassKind::kBackward, 0, 0, 0, 2, 1},
      {PassKind::kBackward, 0, 0, 1, 3, 1},
  }};
  return s;
}

struct Built {
  Schedule s;
  Time comm;
};

std::vector<Built> ZooWithComm() {
  PassCosts u = PassCosts::Unit();
  PassCosts odd{Rational(3, 2), 2, Rational(1, 2), Rational(1, 4)};
  std::vector<Built> out;
  for (const PassCosts& c : {u, odd})
    for (int d : {1, 2, 4})
      for (int v : {1, 2, 3}) {
        out.push_back({Build1F1B(d, v, 2 * d, c), c.comm});
        out.push_back({BuildInterleaved1F1B(d, v, 2 * d, c), c.comm});
        out.push_back({BuildGIS(d, v, 2 * d, c), c.comm});
        out.push_back({BuildGISH(d, v, 2 * d, c), c.comm});
        out.push_back({BuildPO(d, v, 2 * d, c), c.comm});
      }
  return out;
}

std::vector<Schedule> Zoo() {
  std::vector<Schedule> out;
  for (Built& b : ZooWithComm()) out.push_back(std::move(b.s));
  return out;
}

// Peak by brute force: at every allocation instant count the intervals
// [F start, B end) covering it.
std::int64_t OraclePeak(const Schedule& s, int dev) {
  std::vector<std::tuple<Time, Time, int>> iv;
  for (const Pass& f : s.device_passes[dev]) {
    if (f.kind != PassKind::kForward) continue;
    for (const Pass& b : s.device_passes[dev])
      if (b.kind == PassKind::kBackward && b.stage == f.stage && b.microbatch == f.microbatch)
        iv.emplace_back(f.start, b.end(), s.stage_weight[f.stage]);
  }
  std::int64_t best = 0;
  for (const auto& [t, unused, w0] : iv) {
    std::int64_t c = 0;
    for (const auto& [a, b, w] : iv)
      if (a <= t && t < b) c += w;
    best = std::max(best, c);
  }
  return best;
}

TEST(ScheduleTest, RoundRobinPlacement) {
  EXPECT_EQ(RoundRobinPlacement(3, 2), (std::vector<int>{0, 1, 2, 0, 1, 2}));
  Schedule s = BuildGIS(3, 2, 6, PassCosts::Unit());
  EXPECT_EQ(s.DeviceStages(1), (std::vector<int>{1, 4}));
  EXPECT_EQ(s.LocalIndex(4), 1);
}

TEST(ScheduleTest, TinyScheduleIsValidWithPeakTwo) {
  Schedule s = Tiny();
  EXPECT_TRUE(Validate(s, PassCosts::Unit()).empty());
  MemoryTimeline tl = BuildMemoryTimeline(s, ModelSpec{});
  EXPECT_EQ(tl.PeakCount(0), 2);
  EXPECT_EQ(tl.devices[0].Area(), Time(6));  // 3 + 3
  EXPECT_EQ(tl.PeakBytes(0), 2 * ActivationBytesPerLayer(ModelSpec{}, true));
  EXPECT_EQ(s.Makespan(), Time(4));
}

TEST(ScheduleTest, ReleaseBeforeAllocateAtTheSameInstant) {
  Schedule s = Tiny();
  // B0 ends at 3 when the third activation would start.
  s.m = 3;
  s.device_passes[0] = {
      {PassKind::kForward, 0, 0, 0, 0, 1}, {PassKind::kForward, 0, 0, 1, 1, 1},
      {PassKind::kBackward, 0, 0, 0, 2, 1}, {PassKind::kForward, 0, 0, 2, 3, 1},
      {PassKind::kBackward, 0, 0, 1, 4, 1}, {PassKind::kBackward, 0, 0, 2, 5, 1},
  };
  ASSERT_TRUE(Validate(s, PassCosts::Unit()).empty());
  EXPECT_EQ(BuildMemoryTimeline(s, ModelSpec{}).PeakCount(0), 2);
}

TEST(ScheduleTest, MemoryTimelineMatchesBruteForce) {
  for (const Schedule& s : Zoo()) {
    MemoryTimeline tl = BuildMemoryTimeline(s, ModelSpec{});
    for (int dev = 0; dev < s.d; ++dev) {
      EXPECT_EQ(tl.PeakCount(dev), OraclePeak(s, dev)) << s.name << " d=" << s.d << " v=" << s.v;
      auto parts = StageContributionAtPeak(tl, dev);
      EXPECT_EQ(std::accumulate(parts.begin(), parts.end(), std::int64_t{0}), tl.PeakCount(dev));
    }
  }
}

TEST(ScheduleTest, ValidationFlagsEachViolationKind) {
  PassCosts u = PassCosts::Unit();
  Schedule s = Tiny();
  s.device_passes[0][2].start = Rational(1, 2);  // B0 before F0 ends, overlapping F1
  auto vs = Validate(s, u);
  auto has = [&](ViolationKind k) {
    return std::any_of(vs.begin(), vs.end(), [k](const Violation& v) { return v.kind == k; });
  };
  EXPECT_TRUE(has(ViolationKind::kDependency));
  EXPECT_TRUE(has(ViolationKind::kOverlap));

  s = Tiny();
  s.device_passes[0].pop_back();
  vs = Validate(s, u);
  EXPECT_TRUE(has(ViolationKind::kMissing));

  s = Tiny();
  s.device_passes[0].push_back(s.device_passes[0].back());
  s.device_passes[0].back().start = 10;
  vs = Validate(s, u);
  EXPECT_TRUE(has(ViolationKind::kDuplicate));

  s = Tiny();
  s.device_passes[0][0].device = 3;
  vs = Validate(s, u);
  EXPECT_TRUE(has(ViolationKind::kPlacement));
}

TEST(ScheduleTest, CommLatencyAppliesAcrossDevicesOnly) {
  PassCosts c = PassCosts::Unit();
  c.comm = 1;
  Schedule s = BuildGIS(2, 1, 2, c);
  EXPECT_TRUE(Validate(s, c).empty());
  // The same schedule read with zero latency is still valid; the reverse is not.
  EXPECT_TRUE(Validate(s, PassCosts::Unit()).empty());
  Schedule tight = BuildGIS(2, 1, 2, PassCosts::Unit());
  EXPECT_FALSE(Validate(tight, c).empty());
}

TEST(ScheduleTest, RetimeAsapReproducesBuilderTimes) {
  // PO is repeated from release times, so plain ASAP only moves it earlier.
  for (const auto& [s, comm] : ZooWithComm()) {
    Schedule z = s;
    for (auto& list : z.device_passes)
      for (Pass& p : list) p.start = 0;
    RetimeAsap(z, comm);
    if (s.name == "po") {
      for (int dev = 0; dev < s.d; ++dev)
        for (std::size_t i = 0; i < s.device_passes[dev].size(); ++i)
          EXPECT_LE(z.device_passes[dev][i].start, s.device_passes[dev][i].start);
    } else {
      EXPECT_EQ(z, s) << s.name << " d=" << s.d << " v=" << s.v;
    }
  }
}

TEST(ScheduleTest, RetimeAsapReportsDeadlock) {
  Schedule s = Tiny();
  std::swap(s.device_passes[0][0], s.device_passes[0][2]);  // B0 listed before F0
  try {
    RetimeAsap(s, 0);
    FAIL() << "expected deadlock";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDeadlock);
  }
}

TEST(ScheduleTest, SerializationRoundTrips) {
  for (const Schedule& s : Zoo()) {
    Schedule back = ParseScheduleString(ScheduleToString(s));
    EXPECT_EQ(back, s) << s.name;
  }
  EXPECT_EQ(ParseScheduleString(ScheduleToString(Tiny())), Tiny());
}

TEST(ScheduleTest, ParseInfersMissingHeaders) {
  Schedule s = ParseScheduleString("0 0 0 F 0 1\n0 0 0 B 1 1\n");
  EXPECT_EQ(s.d, 1);
  EXPECT_EQ(s.m, 1);
  EXPECT_EQ(s.num_passes(), 2u);
  EXPECT_TRUE(Validate(s, PassCosts::Unit()).empty());
}

TEST(ScheduleTest, ParseErrorsNameTheLine) {
  try {
    ParseScheduleString("# ppoff schedule\n0 0 0 F 0 1\nnot a pass line\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ParseScheduleString("0 0 0 Q 0 1\n"), Error);
  EXPECT_THROW(ParseScheduleString("0 0 0 F x 1\n"), Error);
}

TEST(ScheduleTest, OneFOneBBlockLifespans) {
  // d=2, v=1, unit costs: F0 [0,1) F1 [1,2) B1 [2,4) B0 [4,6).
  Schedule s = Build1F1B(2, 1, 4, PassCosts::Unit());
  BuildingBlock b = ExtractBlock(s, 0);
  EXPECT_EQ(b.forward, (std::vector<Time>{0, 1}));
  EXPECT_EQ(b.backward, (std::vector<Time>{4, 2}));
  EXPECT_EQ(Lifespan(b, 0), Time(6));
  EXPECT_EQ(Lifespan(b, 1), Time(3));
  EXPECT_TRUE(CheckBlock(b).empty());
}

TEST(ScheduleTest, CheckBlockRejectsBackwardBeforeForward) {
  BuildingBlock b = ExtractBlock(Build1F1B(2, 1, 4, PassCosts::Unit()), 0);
  b.backward[1] = 0;
  EXPECT_FALSE(CheckBlock(b).empty());
}

TEST(ScheduleTest, MostFrequentBlockOfGISIsConsistent) {
  Schedule s = BuildGIS(4, 2, 16, PassCosts::Unit());
  BuildingBlock b = MostFrequentBlock(s);
  EXPECT_TRUE(CheckBlock(b).empty());
  EXPECT_EQ(b.num_stages(), 8);
}

}  // namespace
}  // namespace ppoff
