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

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "ppoff/composition.h"
#include "ppoff/error.h"

namespace ppoff {

int OffloadChoice::StagesFor(int v) const {
  switch (mode) {
    case Mode::kNone:
      return 0;
    case Mode::kHalf:
      return (v + 1) / 2;
    case Mode::kFull:
      return v;
    case Mode::kCount:
      return count;
  }
  return 0;
}

std::string OffloadChoice::ToString() const {
  switch (mode) {
    case Mode::kNone:
      return "none";
    case Mode::kHalf:
      return "half";
    case Mode::kFull:
      return "full";
    case Mode::kCount:
      return std::to_string(count);
  }
  return "none";
}

OffloadChoice OffloadChoice::Parse(const std::string& text) {
  OffloadChoice c;
  if (text == "none") return c;
  if (text == "half") {
    c.mode = Mode::kHalf;
    return c;
  }
  if (text == "full") {
    c.mode = Mode::kFull;
    return c;
  }
  try {
    std::size_t used = 0;
    int n = std::stoi(text, &used);
    if (used == text.size() && n >= 0) {
      c.mode = n == 0 ? Mode::kNone : Mode::kCount;
      c.count = n;
      return c;
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidConfig, "offload must be none, half, full or a count, got '" + text + "'");
}

std::string RunSpec::Describe() const {
  std::ostringstream os;
  os << "kind=" << ScheduleKindName(kind) << " d=" << d << " v=" << v << " m=" << m;
  if (kind == ScheduleKind::kGISG) os << " g=" << g;
  os << " costs=" << costs.forward << ',' << costs.backward << ',' << costs.weight << ',' << costs.comm
     << " offload=" << offload.ToString();
  if (offload.mode != OffloadChoice::Mode::kNone) os << " round_trip=" << round_trip;
  os << " contention=" << (contention == ContentionMode::kNone ? "none" : "switch")
     << " sync=" << (topology_sync ? 1 : 0) << " model=" << model.hidden_size << ',' << model.sequence_length
     << ',' << model.microbatch_size << ',' << model.layers_per_stage << ',' << model.bytes_per_element;
  if (builder.warmup_delta != 0) os << " warmup_delta=" << builder.warmup_delta;
  return os.str();
}

std::string ConfigHash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunResult Run(const RunSpec& spec) {
  RunResult r;
  r.schedule = BuildSchedule(spec.kind, spec.d, spec.v, spec.m, spec.g, spec.costs, spec.builder);
  int local = r.schedule.num_stages() / r.schedule.d;
  OffloadChoice offload = spec.offload;
  if (spec.kind == ScheduleKind::kOneFOneBFullOffload) offload.mode = OffloadChoice::Mode::kFull;
  int n = offload.StagesFor(local);
  if (n > local)
    throw Error(ErrorCode::kInvalidConfig,
                "cannot offload " + std::to_string(n) + " of " + std::to_string(local) + " local stages");
  if (n > 0) {
    if (!(spec.round_trip > 0)) throw Error(ErrorCode::kInvalidConfig, "offload needs a positive round trip");
    BuildingBlock block = spec.kind == ScheduleKind::kPO ? POBlock(spec.d, spec.v, spec.costs)
                                                         : MostFrequentBlock(r.schedule, spec.costs.comm);
    block.v = local;
    r.plan = PlanSlots(r.schedule, SelectOffloadStages(block, n), spec.round_trip);
    if (spec.topology_sync) r.plan = ApplyTopologySync(r.schedule, *r.plan, spec.hardware);
  }
  SimOptions opt;
  opt.contention = spec.contention;
  opt.model = spec.model;
  r.trace = Simulate(r.schedule, r.plan ? &*r.plan : nullptr, spec.costs, spec.hardware, opt);
  r.peaks = PeakMemory(r.trace);
  r.bubbles = BubbleTime(r.trace);
  return r;
}

bool ClosedFormReport::ok() const { return FirstFailure() == nullptr; }

const ClosedFormRow* ClosedFormReport::FirstFailure() const {
  for (const ClosedFormRow& r : rows)
    if (r.gating && !r.match) return &r;
  return nullptr;
}

namespace {

Time MaxOf(const std::vector<Time>& xs) {
  Time m = 0;
  for (const Time& x : xs) m = max(m, x);
  return m;
}

}  // namespace

ClosedFormReport VerifyClosedForms(int d, int v, const PassCosts& costs, const ClosedFormOptions& options) {
  ClosedFormReport rep;
  rep.d = d;
  rep.v = v;
  int g = (d + 1) / 2;
  rep.m = std::max(2 * d, 2 * std::lcm(d, g));
  Time fbw = costs.total();
  Time fb = costs.forward + costs.backward;
  Rational M(static_cast<std::int64_t>(d) * v);

  auto add = [&](const std::string& sched, const std::string& metric, const std::string& formula,
                 const Rational& expected, const Rational& simulated, RowCheck check, bool gating) {
    ClosedFormRow row{sched, metric, formula, expected, simulated, check, false, gating};
    switch (check) {
      case RowCheck::kExact:
        row.match = simulated == expected;
        break;
      case RowCheck::kBound:
        row.match = metric == "bubble" && sched.rfind("po", 0) == 0 ? simulated < expected : simulated <= expected;
        break;
      case RowCheck::kApprox: {
        Rational diff = simulated - expected;
        row.match = diff <= 1 && -diff <= 1;
        break;
      }
    }
    rep.rows.push_back(row);
  };
  auto run = [&](ScheduleKind kind, OffloadChoice off) {
    RunSpec s;
    s.kind = kind;
    s.d = d;
    s.v = v;
    s.m = rep.m;
    s.costs = costs;
    s.offload = off;
    s.round_trip = options.k * fbw;
    s.builder = options.builder;
    return Run(s);
  };

  RunResult r = run(ScheduleKind::kOneFOneB, {});
  add("1F1B", "activation", "dv", M, r.peaks.count[0], RowCheck::kExact, true);
  add("1F1B", "bubble", "v(d-1)(F+B+W)", Time(v) * Time(d - 1) * fbw, MaxOf(r.bubbles), RowCheck::kExact, true);
  r = run(ScheduleKind::kInterleaved1F1B, {});
  add("1F1B-I", "activation", "dv+d-1", M + Time(d - 1), r.peaks.count[0], RowCheck::kExact, true);
  add("1F1B-I", "bubble", "(d-1)(F+B+W)", Time(d - 1) * fbw, MaxOf(r.bubbles), RowCheck::kExact, true);
  r = run(ScheduleKind::kGIS, {});
  add("GIS", "activation", "dv", M, r.peaks.count[0], RowCheck::kExact, true);
  add("GIS", "bubble", "(d-1)(F+B)", Time(d - 1) * fb, MaxOf(r.bubbles), RowCheck::kExact, true);
  r = run(ScheduleKind::kGISH, {});
  add("GIS-H", "activation", "g(v-1)+d", Time(g * (v - 1) + d), r.peaks.count[0], RowCheck::kExact, true);
  add("GIS-H", "bubble", "(d-1)(F+B)+((v-1)d/2)(F+B-W)",
      Time(d - 1) * fb + Time(static_cast<std::int64_t>(v - 1) * d, 2) * (fb - costs.weight), MaxOf(r.bubbles),
      RowCheck::kBound, true);
  Time po_bound = Time(v) * Time(d - 1) * fbw;
  r = run(ScheduleKind::kPO, {OffloadChoice::Mode::kHalf, 0});
  add("PO-H", "activation", "(v+2)/(8v)M", Rational(v + 2, 8 * v) * M, r.peaks.count[0], RowCheck::kApprox, false);
  add("PO-H", "bubble", "< v(d-1)(F+B+W)", po_bound, MaxOf(r.bubbles), RowCheck::kBound, true);
  r = run(ScheduleKind::kPO, {OffloadChoice::Mode::kFull, 0});
  add("PO-F", "activation", "O(1) in vd, at most 6", Rational(6), r.peaks.count[0], RowCheck::kBound, false);
  add("PO-F", "bubble", "< v(d-1)(F+B+W)", po_bound, MaxOf(r.bubbles), RowCheck::kBound, true);
  return rep;
}

std::string SweepResult::ToCsv() const {
  std::ostringstream os;
  for (const auto& a : axes) os << a << ',';
  os << "kind,peak_count,peak_bytes,bubble,makespan,ratio_to_no_offload,ratio_to_1f1b,skipped,infeasible,"
        "config_hash,config\n";
  for (const SweepPoint& p : points) {
    for (auto a : p.axis) os << a << ',';
    os << p.kind << ',' << p.peak_count << ',' << p.peak_bytes << ',' << p.bubble << ',' << p.makespan << ','
       << p.ratio_to_no_offload << ',' << p.ratio_to_1f1b << ',' << p.skipped << ',' << p.infeasible << ','
       << p.config_hash << ",\"" << p.config << "\"\n";
  }
  return os.str();
}

std::string SweepResult::ToJson() const {
  nlohmann::json j;
  j["name"] = name;
  j["axes"] = axes;
  j["points"] = nlohmann::json::array();
  for (const SweepPoint& p : points) {
    j["points"].push_back({{"axis", p.axis},
                           {"kind", p.kind},
                           {"peak_count", p.peak_count},
                           {"peak_bytes", p.peak_bytes},
                           {"bubble", p.bubble.to_string()},
                           {"makespan", p.makespan.to_string()},
                           {"ratio_to_no_offload", p.ratio_to_no_offload},
                           {"ratio_to_1f1b", p.ratio_to_1f1b},
                           {"skipped", p.skipped},
                           {"infeasible", p.infeasible},
                           {"config", p.config},
                           {"config_hash", p.config_hash}});
  }
  return j.dump(2);
}

namespace {

SweepPoint PointFrom(const RunSpec& spec, const RunResult& r) {
  SweepPoint p;
  p.kind = ScheduleKindName(spec.kind);
  p.peak_count = r.peaks.max_count;
  p.peak_bytes = r.peaks.max_bytes;
  p.bubble = MaxOf(r.bubbles);
  p.makespan = r.trace.makespan;
  p.ratio_to_1f1b = static_cast<double>(p.peak_count) / (static_cast<double>(spec.d) * spec.v);
  if (r.plan) {
    p.skipped = r.plan->skipped.size();
    p.infeasible = r.plan->infeasible.size();
  }
  p.config = spec.Describe();
  p.config_hash = ConfigHash(p.config);
  return p;
}

}  // namespace

SweepResult ReductionCurve(int d, int v, int m, const PassCosts& costs, const Time& round_trip,
                           const ModelSpec& model) {
  SweepResult res;
  res.name = "reduction-curve";
  res.axes = {"n_offloaded"};
  for (int n = 0; n <= v; ++n) {
    RunSpec s;
    s.kind = ScheduleKind::kPO;
    s.d = d;
    s.v = v;
    s.m = m;
    s.costs = costs;
    s.offload = n == 0 ? OffloadChoice{} : OffloadChoice{OffloadChoice::Mode::kCount, n};
    s.round_trip = round_trip;
    s.model = model;
    RunResult r = Run(s);
    SweepPoint p = PointFrom(s, r);
    p.axis = {n};
    if (!res.points.empty())
      p.ratio_to_no_offload = static_cast<double>(p.peak_count) / static_cast<double>(res.points[0].peak_count);
    res.points.push_back(p);
  }
  return res;
}

bool BetterThanLinear(const SweepResult& curve) {
  const auto& pts = curve.points;
  if (pts.size() < 3) return true;
  std::int64_t n = static_cast<std::int64_t>(pts.size()) - 1;
  std::int64_t first = pts.front().peak_count, last = pts.back().peak_count;
  for (std::int64_t i = 1; i < n; ++i)
    if (pts[i].peak_count * n > first * (n - i) + last * i) return false;
  return true;
}

SweepResult ScalingStudy(const std::vector<int>& total_stages, const std::vector<std::string>& kinds,
                         const PassCosts& costs, const Rational& k, const std::vector<int>& ds,
                         const ModelSpec& model) {
  SweepResult res;
  res.name = "scaling-study";
  res.axes = {"total_stages", "d", "v"};
  for (const std::string& name : kinds) {
    OffloadChoice off;
    std::string base = name;
    if (name == "po-h") {
      base = "po";
      off.mode = OffloadChoice::Mode::kHalf;
    } else if (name == "po-f") {
      base = "po";
      off.mode = OffloadChoice::Mode::kFull;
    }
    auto kind = ParseScheduleKind(base);
    if (!kind) throw Error(ErrorCode::kInvalidConfig, "unknown schedule '" + name + "'");
    for (int total : total_stages) {
      std::optional<SweepPoint> best;
      for (int d : ds) {
        if (d < 1 || total % d != 0) continue;
        int v = total / d;
        RunSpec s;
        s.kind = *kind;
        s.d = d;
        s.v = v;
        s.m = 4 * d;
        s.costs = costs;
        s.offload = off;
        s.round_trip = k * costs.total();
        s.model = model;
        SweepPoint p = PointFrom(s, Run(s));
        p.kind = name;
        p.axis = {total, d, v};
        if (!best || p.peak_count < best->peak_count) best = p;
      }
      if (best) res.points.push_back(*best);
    }
  }
  return res;
}

const char* DominanceName(Dominance d) {
  switch (d) {
    case Dominance::kFirst:
      return "first-dominates";
    case Dominance::kSecond:
      return "second-dominates";
    case Dominance::kTie:
      return "tie";
    case Dominance::kTrade:
      return "trade";
  }
  return "?";
}

Dominance Compare(const FrontPoint& a, const FrontPoint& b) {
  if (a.peak == b.peak && a.bubble == b.bubble) return Dominance::kTie;
  if (a.peak <= b.peak && a.bubble <= b.bubble) return Dominance::kFirst;
  if (b.peak <= a.peak && b.bubble <= a.bubble) return Dominance::kSecond;
  return Dominance::kTrade;
}

}  // namespace ppoff
