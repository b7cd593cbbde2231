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

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "ppoff/builders.h"
#include "ppoff/config.h"
#include "ppoff/error.h"
#include "ppoff/render.h"

namespace ppoff {
namespace {

std::optional<ErrorCode> CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

TEST(ConfigTest, PresetsMatchTheModelTable) {
  struct Row {
    const char* name;
    int layers;
    std::int64_t hidden;
  };
  for (Row r : {Row{"5.8B", 32, 4096}, Row{"10.5B", 38, 5120}, Row{"18.1B", 46, 6144}, Row{"42.9B", 62, 8192},
                Row{"66.6B", 62, 10240}, Row{"83.8B", 78, 10240}}) {
    const ModelPreset* p = FindPreset(r.name);
    ASSERT_NE(p, nullptr) << r.name;
    EXPECT_EQ(p->layers, r.layers);
    EXPECT_EQ(p->hidden_size, r.hidden);
  }
  EXPECT_EQ(FindPreset("1T"), nullptr);
}

TEST(ConfigTest, CostsParseAndPrint) {
  PassCosts c = ParseCosts("1,2,1/2,0.25");
  EXPECT_EQ(c.forward, Time(1));
  EXPECT_EQ(c.backward, Time(2));
  EXPECT_EQ(c.weight, Rational(1, 2));
  EXPECT_EQ(c.comm, Rational(1, 4));
  EXPECT_EQ(ParseCosts(CostsToString(c)).total(), c.total());
  EXPECT_EQ(CodeOf([] { ParseCosts("1,2"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(CodeOf([] { ParseCosts("1,x,1,0"); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(ParseContention("switch"), ContentionMode::kSwitchHalving);
  EXPECT_EQ(ParseContention("none"), ContentionMode::kNone);
  EXPECT_THROW(ParseContention("maybe"), Error);
}

TEST(ConfigTest, JsonRoundTripAndUnknownKeys) {
  RunConfig c;
  c.kind = ScheduleKind::kGISG;
  c.d = 8;
  c.g = 5;
  c.offload = OffloadChoice::Parse("half");
  c.costs = ParseCosts("1,1,1,0");
  c.k = Rational(3, 4);
  RunConfig back = RunConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
  EXPECT_EQ(back.g, 5);
  nlohmann::json j = c.ToJson();
  j["schedule"]["colour"] = "red";
  EXPECT_EQ(CodeOf([&] { RunConfig::FromJson(j); }), ErrorCode::kInvalidConfig);
  nlohmann::json top = c.ToJson();
  top["extra"] = 1;
  EXPECT_THROW(RunConfig::FromJson(top), Error);
}

TEST(ConfigTest, LoadReportsParseErrors) {
  std::string path = ::testing::TempDir() + "ppoff_bad.json";
  std::ofstream(path) << "{ not json";
  EXPECT_EQ(CodeOf([&] { RunConfig::Load(path); }), ErrorCode::kParse);
  std::remove(path.c_str());
  EXPECT_THROW(RunConfig::Load(path), Error);
}

TEST(ConfigTest, ValidateChecksReferences) {
  RunConfig c;
  c.kind = ScheduleKind::kGISG;
  EXPECT_THROW(c.Validate(), Error);  // needs g
  c.g = 3;
  EXPECT_NO_THROW(c.Validate());
  c.kind = ScheduleKind::kGIS;
  EXPECT_THROW(c.Validate(), Error);  // g only with gis-g
  c.g = 0;
  c.offload = OffloadChoice::Parse("3");
  EXPECT_THROW(c.Validate(), Error);  // v = 2
}

TEST(ConfigTest, RoundTripIsKTimesPassTotal) {
  RunConfig c;
  c.costs = ParseCosts("2,3,1,0");
  c.k = Rational(1, 2);
  EXPECT_EQ(c.RoundTrip(), Time(3));
  EXPECT_EQ(c.microbatches(), 16);
  c.offload = OffloadChoice::Parse("full");
  EXPECT_TRUE(c.Warnings().empty());
  c.k = Rational(3, 2);
  ASSERT_EQ(c.Warnings().size(), 1u);
  EXPECT_NE(c.Warnings()[0].find("k budget"), std::string::npos);
}

TEST(ConfigTest, StageModelSplitsLayers) {
  RunConfig c;
  c.total_layers = 64;
  c.d = 4;
  c.v = 2;
  EXPECT_EQ(c.StageModel().layers_per_stage, 8);
  c.total_layers = 3;
  EXPECT_EQ(c.StageModel().layers_per_stage, 1);
}

Schedule Tiny() {
  return ParseScheduleString("0 0 0 F 0 1\n0 0 1 F 1 1\n0 0 0 B 2 1\n0 0 1 B 3 1\n");
}

TEST(RenderTest, AsciiByHand) {
  RenderInput in{Tiny(), {}};
  std::string out = RenderAscii(in);
  EXPECT_EQ(out.substr(0, out.find('\n')), "dev0  |FFBB|");
  in.transfers.push_back(Transfer{Direction::kD2H, 0, 0, 0, 1, Rational(1, 2), 0});
  in.transfers.push_back(Transfer{Direction::kH2D, 0, 0, 0, Rational(3, 2), Rational(1, 2), 1});
  out = RenderAscii(in, RenderOptions{false, 0, 1200, 8});
  std::istringstream lines(out);
  std::string a, b;
  std::getline(lines, a);
  std::getline(lines, b);
  EXPECT_EQ(a, "dev0  |FFFFBBBB|");
  EXPECT_EQ(b, "  io  |  ><    |");
}

TEST(RenderTest, TextRoundTripKeepsTransfers) {
  RenderInput in{Tiny(), {Transfer{Direction::kD2H, 0, 0, 0, 1, Rational(1, 2), 0}}};
  RenderInput back = ParseRenderInput(RenderInputToString(in));
  EXPECT_EQ(back.schedule, in.schedule);
  ASSERT_EQ(back.transfers.size(), 1u);
  EXPECT_EQ(back.transfers[0].start, Time(1));
  EXPECT_EQ(back.transfers[0].dir, Direction::kD2H);
  EXPECT_EQ(CodeOf([] { ParseRenderInput("0 0 0 F 0 1\n0 0 0 B 1 1\n5 0 0 OFFLOAD 1 1\n"); }), ErrorCode::kParse);
}

TEST(RenderTest, SvgHasOneRectPerItem) {
  Schedule s = BuildGIS(2, 2, 4, PassCosts::Unit());
  RenderInput in{s, {}};
  std::string svg = RenderSvg(in);
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  auto count = [&](const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t at = svg.find(needle); at != std::string::npos; at = svg.find(needle, at + 1)) ++n;
    return n;
  };
  EXPECT_EQ(count("<rect"), s.num_passes() + count("class=\"background"));
  EXPECT_EQ(count("id=\"device-"), 2u);
  RenderOptions o;
  o.memory_strip = true;
  EXPECT_NE(RenderSvg(in, o).find("<path"), std::string::npos);
}

TEST(RenderTest, MemoryAccountsForOffloadGaps) {
  // mb0 sits on the host between 3/2 and 5/2, which removes one unit of area.
  Schedule s = ParseScheduleString("0 0 0 F 0 1\n0 0 1 F 2 1\n0 0 0 B 3 1\n0 0 1 B 4 1\n");
  RenderInput in{s, {}};
  EXPECT_EQ(RenderMemory(in).devices[0].Area(), Time(7));
  in.transfers.push_back(Transfer{Direction::kD2H, 0, 0, 0, 1, Rational(1, 2), 0});
  in.transfers.push_back(Transfer{Direction::kH2D, 0, 0, 0, Rational(5, 2), Rational(1, 2), 1});
  EXPECT_EQ(RenderMemory(in).devices[0].Area(), Time(6));
  EXPECT_EQ(RenderMemory(in).PeakCount(0), 2);
}

}  // namespace
}  // namespace ppoff
