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

#include "ppoff/analysis.h"

#include <gtest/gtest.h>

#include <algorithm>
#include "json.hpp"

#include "ppoff/builders.h"
#include "ppoff/error.h"

namespace ppoff {
namespace {

TEST(AnalysisTest, OffloadChoiceParsing) {
  EXPECT_EQ(OffloadChoice::Parse("none").StagesFor(4), 0);
  EXPECT_EQ(OffloadChoice::Parse("half").StagesFor(3), 2);
  EXPECT_EQ(OffloadChoice::Parse("half").StagesFor(4), 2);
  EXPECT_EQ(OffloadChoice::Parse("full").StagesFor(3), 3);
  EXPECT_EQ(OffloadChoice::Parse("2").StagesFor(4), 2);
  EXPECT_EQ(OffloadChoice::Parse("0").StagesFor(4), 0);
  EXPECT_THROW(OffloadChoice::Parse("lots"), Error);
  EXPECT_THROW(OffloadChoice::Parse("-1"), Error);
  for (const char* s : {"none", "half", "full", "3"}) EXPECT_EQ(OffloadChoice::Parse(s).ToString(), s);
}

TEST(AnalysisTest, ConfigHashIsFnv1a) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(ConfigHash(""), "cbf29ce484222325");
  EXPECT_EQ(ConfigHash("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(ConfigHash("foobar"), "85944171f73967e8");
}

TEST(AnalysisTest, DescribeIsStableAndDistinguishing) {
  RunSpec a;
  RunSpec b = a;
  EXPECT_EQ(a.Describe(), b.Describe());
  b.v = 4;
  EXPECT_NE(a.Describe(), b.Describe());
  b = a;
  b.offload = OffloadChoice::Parse("half");
  b.round_trip = 3;
  EXPECT_NE(a.Describe(), b.Describe());
}

TEST(AnalysisTest, RunWithoutOffloadMatchesBuilder) {
  RunSpec spec;
  spec.kind = ScheduleKind::kGIS;
  spec.d = 4;
  spec.v = 2;
  spec.m = 16;
  RunResult r = ppoff::Run(spec);
  Schedule s = BuildGIS(4, 2, 16, PassCosts::Unit());
  EXPECT_EQ(r.schedule.device_passes, s.device_passes);
  EXPECT_FALSE(r.plan.has_value());
  EXPECT_EQ(r.peaks.count[0], BuildMemoryTimeline(s, {}).PeakCount(0));
  EXPECT_EQ(r.trace.makespan, s.Makespan());
}

TEST(AnalysisTest, RunWithHalfOffloadLowersPeak) {
  RunSpec spec;
  spec.kind = ScheduleKind::kPO;
  spec.d = 4;
  spec.v = 2;
  spec.m = 16;
  RunResult base = ppoff::Run(spec);
  spec.offload = OffloadChoice::Parse("half");
  spec.round_trip = Rational(3, 2);
  RunResult off = ppoff::Run(spec);
  ASSERT_TRUE(off.plan.has_value());
  EXPECT_LT(off.peaks.max_count, base.peaks.max_count);
  EXPECT_EQ(off.trace.makespan, base.trace.makespan);
}

TEST(AnalysisTest, ClosedFormsHoldAtD8V2) {
  ClosedFormReport r = VerifyClosedForms(8, 2, PassCosts::Unit());
  EXPECT_TRUE(r.ok()) << (r.FirstFailure() ? r.FirstFailure()->schedule + " " + r.FirstFailure()->metric : "");
  EXPECT_EQ(r.m, 16);
  std::size_t gating = std::count_if(r.rows.begin(), r.rows.end(), [](const ClosedFormRow& x) { return x.gating; });
  EXPECT_GE(gating, 6u);
  for (const ClosedFormRow& row : r.rows)
    if (row.gating) EXPECT_TRUE(row.match) << row.schedule << " " << row.metric;
}

TEST(AnalysisTest, ClosedFormsCatchAShiftedWarmup) {
  ClosedFormOptions o;
  o.builder.warmup_delta = 1;
  ClosedFormReport r = VerifyClosedForms(4, 2, PassCosts::Unit(), o);
  EXPECT_FALSE(r.ok());
  ASSERT_NE(r.FirstFailure(), nullptr);
  EXPECT_EQ(r.FirstFailure()->schedule, "GIS");
}

TEST(AnalysisTest, ReductionCurveStartsAtPlainPO) {
  SweepResult c = ReductionCurve(4, 2, 16, PassCosts::Unit(), Rational(3, 2));
  ASSERT_EQ(c.points.size(), 3u);
  std::int64_t plain = 0;
  Schedule po = BuildPO(4, 2, 16, PassCosts::Unit());
  MemoryTimeline tl = BuildMemoryTimeline(po, {});
  for (int dev = 0; dev < 4; ++dev) plain = std::max(plain, tl.PeakCount(dev));
  EXPECT_EQ(c.points[0].peak_count, plain);
  for (std::size_t i = 1; i < c.points.size(); ++i) EXPECT_LE(c.points[i].peak_count, c.points[i - 1].peak_count);
  EXPECT_DOUBLE_EQ(c.points[0].ratio_to_no_offload, 1.0);
}

TEST(AnalysisTest, SweepCsvAndJson) {
  SweepResult c = ReductionCurve(2, 2, 8, PassCosts::Unit(), Rational(3, 2));
  std::string csv = c.ToCsv();
  std::string header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(header.rfind(c.axes.front() + ",", 0), 0u) << header;
  EXPECT_NE(header.find("peak_count"), std::string::npos);
  EXPECT_NE(header.find("config_hash"), std::string::npos);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 1 + c.points.size());
  nlohmann::json j = nlohmann::json::parse(c.ToJson());
  EXPECT_TRUE(j.contains("points") || j.is_array() || j.is_object());
  for (const SweepPoint& p : c.points) EXPECT_EQ(p.config_hash, ConfigHash(p.config));
}

TEST(AnalysisTest, ScalingStudyFullOffloadStaysFlat) {
  SweepResult s = ScalingStudy({8, 16}, {"po-f"}, PassCosts::Unit(), Rational(1, 2), {2, 4});
  ASSERT_EQ(s.points.size(), 2u);
  EXPECT_EQ(s.points[0].peak_count, s.points[1].peak_count);
}

TEST(AnalysisTest, DominanceCases) {
  FrontPoint a{"a", 10, 5}, b{"b", 12, 5}, c{"c", 8, 7};
  EXPECT_EQ(Compare(a, b), Dominance::kFirst);
  EXPECT_EQ(Compare(b, a), Dominance::kSecond);
  EXPECT_EQ(Compare(a, a), Dominance::kTie);
  EXPECT_EQ(Compare(a, c), Dominance::kTrade);
  EXPECT_STREQ(DominanceName(Dominance::kTrade), "trade");
}

TEST(AnalysisTest, GISDominatesInterleavedOneFOneB) {
  PassCosts u = PassCosts::Unit();
  auto point = [&](const Schedule& s) {
    SimTrace t = Simulate(s, nullptr, u, HardwareSpec{});
    std::vector<Time> b = BubbleTime(t);
    return FrontPoint{s.name, PeakMemory(t).max_count, *std::max_element(b.begin(), b.end())};
  };
  FrontPoint gis = point(BuildGIS(4, 2, 16, u));
  FrontPoint i1 = point(BuildInterleaved1F1B(4, 2, 16, u));
  FrontPoint gish = point(BuildGISH(4, 2, 16, u));
  EXPECT_EQ(Compare(gis, i1), Dominance::kFirst);
  EXPECT_EQ(Compare(gish, gis), Dominance::kTrade);
}

}  // namespace
}  // namespace ppoff
