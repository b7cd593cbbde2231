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

#ifndef PPOFF_ANALYSIS_H_
#define PPOFF_ANALYSIS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ppoff/builders.h"
#include "ppoff/cost_model.h"
#include "ppoff/simulator.h"

namespace ppoff {

// What a run offloads: none, ceil(v/2) stages, all stages or an explicit count.
struct OffloadChoice {
  enum class Mode { kNone, kHalf, kFull, kCount };
  Mode mode = Mode::kNone;
  int count = 0;

  int StagesFor(int v) const;
  std::string ToString() const;
  // "none", "half", "full" or a non-negative integer.
  static OffloadChoice Parse(const std::string& text);
};

struct RunSpec {
  ScheduleKind kind = ScheduleKind::kGIS;
  int d = 4;
  int v = 2;
  int m = 8;
  int g = 0;  // GIS_G only
  PassCosts costs;
  OffloadChoice offload;
  Time round_trip = 0;  // required when offloading
  ContentionMode contention = ContentionMode::kNone;
  bool topology_sync = false;
  HardwareSpec hardware;
  ModelSpec model;
  BuilderOptions builder;

  // Canonical one-line description used for provenance.
  std::string Describe() const;
};

struct RunResult {
  Schedule schedule;
  std::optional<OffloadPlan> plan;
  SimTrace trace;
  PeakReport peaks;
  std::vector<Time> bubbles;
};

// Builds, plans (offloaded stages chosen by lifespan in the schedule's
// steady-state block) and simulates one configuration.
RunResult Run(const RunSpec& spec);

// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string ConfigHash(const std::string& text);

enum class RowCheck { kExact, kBound, kApprox };

struct ClosedFormRow {
  std::string schedule;
  std::string metric;  // "activation" or "bubble"
  std::string formula;
  Rational expected = 0;
  Rational simulated = 0;
  RowCheck check = RowCheck::kExact;
  bool match = false;
  bool gating = false;  // counts toward the pass/fail verdict
};

struct ClosedFormReport {
  int d = 0;
  int v = 0;
  int m = 0;
  std::vector<ClosedFormRow> rows;

  bool ok() const;
  const ClosedFormRow* FirstFailure() const;
};

struct ClosedFormOptions {
  Rational k = Rational(1, 2);  // offload round trip over T_F+T_B+T_W for the PO rows
  BuilderOptions builder;       // test hook, see BuilderOptions
};

// Activation is the rank-0 peak in stage-activation units (M = dv);
// bubbles are per-device idle time under `costs`. Exact rows compare with
// equality, bound rows by inequality, approximate rows within one unit.
ClosedFormReport VerifyClosedForms(int d, int v, const PassCosts& costs, const ClosedFormOptions& options = {});

struct SweepPoint {
  std::vector<std::int64_t> axis;  // one value per SweepResult::axes
  std::string kind;
  std::int64_t peak_count = 0;  // maximum over devices
  std::int64_t peak_bytes = 0;
  Time bubble = 0;  // maximum over devices
  Time makespan = 0;
  double ratio_to_no_offload = 1.0;
  double ratio_to_1f1b = 1.0;  // peak over dv
  std::size_t skipped = 0;
  std::size_t infeasible = 0;
  std::string config;
  std::string config_hash;
};

struct SweepResult {
  std::string name;
  std::vector<std::string> axes;
  std::vector<SweepPoint> points;

  std::string ToCsv() const;
  std::string ToJson() const;
};

// PO with the n longest-lived local stages offloaded, n = 0..v.
SweepResult ReductionCurve(int d, int v, int m, const PassCosts& costs, const Time& round_trip,
                           const ModelSpec& model = {});

// True when every interior point of a reduction curve lies on or below the
// straight line between its end points.
bool BetterThanLinear(const SweepResult& curve);

// For each total stage count and kind, the factorization v*d over
// d in `ds` with the smallest per-device peak. `kinds` entries are schedule
// names plus "po-h" and "po-f".
SweepResult ScalingStudy(const std::vector<int>& total_stages, const std::vector<std::string>& kinds,
                         const PassCosts& costs, const Rational& k, const std::vector<int>& ds = {2, 4, 8},
                         const ModelSpec& model = {});

enum class Dominance { kFirst, kSecond, kTie, kTrade };
const char* DominanceName(Dominance d);

struct FrontPoint {
  std::string name;
  std::int64_t peak = 0;
  Time bubble = 0;
};

// Lower is better on both axes.
Dominance Compare(const FrontPoint& a, const FrontPoint& b);

}  // namespace ppoff

#endif  // PPOFF_ANALYSIS_H_
