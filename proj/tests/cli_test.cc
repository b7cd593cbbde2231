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

// Drives the ppoff executable end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "ppoff/analysis.h"
#include "ppoff/builders.h"

namespace ppoff {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ("ppoff_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Exit code of `ppoff args`, with stdout+stderr captured in output_.
  int Ppoff(const std::string& args) {
    fs::path log = dir_ / "log.txt";
    std::string cmd = std::string(PPOFF_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    output_ = Slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  static std::string Slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  std::string Out() const { return " --out " + dir_.string(); }

  fs::path dir_;
  std::string output_;
};

TEST_F(CliTest, PlanWritesScheduleAndSummary) {
  ASSERT_EQ(Ppoff("plan --schedule gis --d 8 --v 2 --m 32 --costs 1,1,1,0" + Out()), 0) << output_;
  ASSERT_TRUE(fs::exists(dir_ / "gis.schedule"));
  ASSERT_TRUE(fs::exists(dir_ / "gis.summary.json"));
  nlohmann::json j = nlohmann::json::parse(Slurp(dir_ / "gis.summary.json"));
  EXPECT_EQ(j["peak"], BuildMemoryTimeline(BuildGIS(8, 2, 32, PassCosts::Unit()), {}).PeakCount(0));
  EXPECT_EQ(j["config_hash"].get<std::string>().size(), 16u);
  Schedule back = ParseScheduleString(Slurp(dir_ / "gis.schedule"));
  EXPECT_EQ(back.device_passes, BuildGIS(8, 2, 32, PassCosts::Unit()).device_passes);
}

TEST_F(CliTest, SimulateMatchesLibraryRun) {
  ASSERT_EQ(Ppoff("simulate --schedule po --d 2 --v 2 --offload half --costs 1,1,1,0 --k 1/2 --name x" + Out()), 0)
      << output_;
  EXPECT_TRUE(fs::exists(dir_ / "x.trace.csv"));
  nlohmann::json j = nlohmann::json::parse(Slurp(dir_ / "x.summary.json"));
  RunSpec spec;
  spec.kind = ScheduleKind::kPO;
  spec.d = 2;
  spec.v = 2;
  spec.m = 8;
  spec.offload = OffloadChoice::Parse("half");
  spec.round_trip = Rational(3, 2);
  RunResult r = ppoff::Run(spec);
  EXPECT_EQ(j["makespan"].get<std::string>(), r.trace.makespan.to_string());
  EXPECT_EQ(j["peak_count"], r.peaks.max_count);
}

TEST_F(CliTest, BadGroupSizeIsAConfigError) {
  EXPECT_EQ(Ppoff("plan --schedule gis-g --d 8 --g 1" + Out()), 2);
  EXPECT_NE(output_.find("error: invalid-g"), std::string::npos) << output_;
  EXPECT_EQ(Ppoff("plan --schedule nonsense" + Out()), 2);
  EXPECT_EQ(Ppoff("plan --costs 1,2" + Out()), 2);
}

TEST_F(CliTest, ConfigFileWithFlagOverride) {
  std::ofstream(dir_ / "c.json") << R"({"schedule": {"kind": "gis-h", "d": 4, "v": 2}, "costs": "1,1,1,0"})";
  ASSERT_EQ(Ppoff("plan --config " + (dir_ / "c.json").string() + " --v 3 --name y" + Out()), 0) << output_;
  nlohmann::json j = nlohmann::json::parse(Slurp(dir_ / "y.summary.json"));
  EXPECT_EQ(j["config"]["schedule"]["v"], 3);
  EXPECT_EQ(j["config"]["schedule"]["kind"], "gis-h");
  std::ofstream(dir_ / "bad.json") << R"({"schedule": {"kind": "gis", "depth": 4}})";
  EXPECT_EQ(Ppoff("plan --config " + (dir_ / "bad.json").string() + Out()), 2);
}

TEST_F(CliTest, FullOffloadWarnsAboveKOne) {
  ASSERT_EQ(Ppoff("plan --schedule po --d 2 --v 2 --offload full --costs 1,1,1,0 --k 2" + Out()), 0) << output_;
  EXPECT_NE(output_.find("k budget"), std::string::npos) << output_;
}

TEST_F(CliTest, VerifyPassesAndCatchesInjectedFault) {
  EXPECT_EQ(Ppoff("verify --ds 2,4 --vs 1,2"), 0) << output_;
  EXPECT_EQ(Ppoff("verify --ds 2 --vs 1 --inject gis-warmup"), 1) << output_;
  EXPECT_NE(output_.find("first failing row"), std::string::npos) << output_;
}

TEST_F(CliTest, SweepWritesCsvAndJson) {
  ASSERT_EQ(Ppoff("sweep --kind reduction --schedule po --d 2 --v 2 --costs 1,1,1,0 --k 1/2 --name r" + Out()), 0)
      << output_;
  bool csv = false, json = false;
  for (const auto& e : fs::directory_iterator(dir_)) {
    csv |= e.path().extension() == ".csv";
    json |= e.path().extension() == ".json";
  }
  EXPECT_TRUE(csv);
  EXPECT_TRUE(json);
}

TEST_F(CliTest, RenderAsciiAndSvg) {
  ASSERT_EQ(Ppoff("plan --schedule po --d 2 --v 2 --offload half --costs 1,1,1,0 --k 1/2 --name x" + Out()), 0);
  fs::path svg = dir_ / "x.svg";
  ASSERT_EQ(Ppoff("render " + (dir_ / "x.schedule").string() + " --svg " + svg.string()), 0) << output_;
  EXPECT_NE(output_.find("dev1"), std::string::npos);
  EXPECT_NE(Slurp(svg).find("OFFLOAD"), std::string::npos);
  std::ofstream(dir_ / "bad.schedule") << "0 0 0 F 0 1\nwhat\n";
  EXPECT_EQ(Ppoff("render " + (dir_ / "bad.schedule").string()), 2);
  EXPECT_NE(output_.find("line 2"), std::string::npos) << output_;
}

}  // namespace
}  // namespace ppoff
