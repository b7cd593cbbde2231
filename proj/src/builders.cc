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

#include "ppoff/builders.h"

#include "ppoff/composition.h"
#include "ppoff/error.h"

namespace ppoff {

const char* ScheduleKindName(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kOneFOneB:
      return "1f1b";
    case ScheduleKind::kInterleaved1F1B:
      return "1f1b-i";
    case ScheduleKind::kGIS:
      return "gis";
    case ScheduleKind::kGISG:
      return "gis-g";
    case ScheduleKind::kGISH:
      return "gis-h";
    case ScheduleKind::kPO:
      return "po";
    case ScheduleKind::kOneFOneBFullOffload:
      return "1f1b-offload";
  }
  return "?";
}

std::optional<ScheduleKind> ParseScheduleKind(const std::string& name) {
  for (ScheduleKind k : {ScheduleKind::kOneFOneB, ScheduleKind::kInterleaved1F1B, ScheduleKind::kGIS,
                         ScheduleKind::kGISG, ScheduleKind::kGISH, ScheduleKind::kPO,
                         ScheduleKind::kOneFOneBFullOffload})
    if (name == ScheduleKindName(k)) return k;
  return std::nullopt;
}

namespace {

void CheckShape(int d, int v, int m) {
  if (d < 1 || v < 1) throw Error(ErrorCode::kInvalidConfig, "d and v must be >= 1");
  if (m < d)
    throw Error(ErrorCode::kTooFewMicrobatches,
                "m=" + std::to_string(m) + " is below d=" + std::to_string(d));
}

void CheckMultiple(int m, int d) {
  if (m % d != 0) throw Error(ErrorCode::kInvalidConfig, "m must be a multiple of d");
}

}  // namespace

Schedule Build1F1B(int d, int v, int m, const PassCosts& costs) {
  CheckShape(d, v, m);
  costs.Validate();
  InterleavedParams p;
  p.name = "1f1b";
  p.d = d;
  p.v = 1;
  p.m = m;
  p.g = d;
  p.warmup = [d](int i) { return d - i; };
  p.split_backward = false;
  p.forward = costs.forward * Time(v);
  p.backward = (costs.backward + costs.weight) * Time(v);
  p.weight = 0;
  p.comm = costs.comm;
  Schedule s = ComposeInterleaved(p);
  s.v = v;
  s.stage_weight.assign(s.placement.size(), v);
  return s;
}

Schedule BuildInterleaved1F1B(int d, int v, int m, const PassCosts& costs) {
  CheckShape(d, v, m);
  CheckMultiple(m, d);
  costs.Validate();
  InterleavedParams p;
  p.name = "1f1b-i";
  p.d = d;
  p.v = v;
  p.m = m;
  p.g = d;
  p.warmup = [d, v](int i) { return d * (v - 1) + 2 * (d - i) - 1; };
  p.split_backward = false;
  p.forward = costs.forward;
  p.backward = costs.backward + costs.weight;
  p.weight = 0;
  p.comm = costs.comm;
  return ComposeInterleaved(p);
}

Schedule BuildGISG(int d, int v, int m, int g, const PassCosts& costs, const BuilderOptions& options) {
  if (d < 1 || v < 1) throw Error(ErrorCode::kInvalidConfig, "d and v must be >= 1");
  int lo = (d + 1) / 2;
  if (g < lo || g > d)
    throw Error(ErrorCode::kInvalidG, "g=" + std::to_string(g) + " outside [" + std::to_string(lo) + ", " +
                                          std::to_string(d) + "]");
  CheckShape(d, v, m);
  costs.Validate();
  InterleavedParams p;
  p.name = g == d ? "gis" : g == lo ? "gis-h" : "gis-g";
  p.d = d;
  p.v = v;
  p.m = m;
  p.g = g;
  int delta = options.warmup_delta;
  p.warmup = [d, v, g, delta](int i) { return g * (v - 1) + d - i + delta; };
  p.split_backward = true;
  p.forward = costs.forward;
  p.backward = costs.backward;
  p.weight = costs.weight;
  p.comm = costs.comm;
  return ComposeInterleaved(p);
}

Schedule BuildGIS(int d, int v, int m, const PassCosts& costs, const BuilderOptions& options) {
  if (d >= 1 && m >= d) CheckMultiple(m, d);
  return BuildGISG(d, v, m, d, costs, options);
}

Schedule BuildGISH(int d, int v, int m, const PassCosts& costs, const BuilderOptions& options) {
  return BuildGISG(d, v, m, (d + 1) / 2, costs, options);
}

BuildingBlock GISHBlock(int d, int v, const PassCosts& costs) {
  int g = (d + 1) / 2;
  Schedule s = BuildGISG(d, v, 4 * g * d, g, costs);
  return MostFrequentBlock(s, costs.comm);
}

namespace {

// Places F passes up the chain and B passes down it on a per-device cycle
// grid (see POBlock). `lower` optionally bounds each offset from below.
BuildingBlock CycleBlock(int d, int v, const PassCosts& costs, const BuildingBlock* lower) {
  Time cycle = costs.total();
  if (!(cycle > 0) || !(costs.forward > 0)) throw Error(ErrorCode::kInvalidConfig, "PO needs T_F > 0");
  BuildingBlock block;
  block.d = d;
  block.v = v;
  block.placement = RoundRobinPlacement(d, v);
  block.forward_duration = costs.forward;
  block.backward_duration = costs.backward;
  block.weight_duration = costs.weight;
  block.comm = costs.comm;
  int n = v * d;
  block.forward.resize(n);
  block.backward.resize(n);
  block.weight.resize(n);
  std::vector<std::optional<Time>> phase(d);
  std::vector<std::vector<bool>> used_f(d, std::vector<bool>(v)), used_b(d, std::vector<bool>(v));
  auto lag = [&](int a, int b) { return block.placement[a] == block.placement[b] ? Time(0) : costs.comm; };
  auto place = [&](int dev, Time ready, bool backward) {
    if (!phase[dev]) phase[dev] = ready - Time((ready / cycle).floor()) * cycle;
    Time base = *phase[dev] + (backward ? costs.forward : Time(0));
    std::int64_t j = ((ready - base) / cycle).ceil();
    auto& used = backward ? used_b[dev] : used_f[dev];
    while (used[((j % v) + v) % v]) ++j;
    used[((j % v) + v) % v] = true;
    return base + Time(j) * cycle;
  };
  for (int s = 0; s < n; ++s) {
    Time ready = s == 0 ? Time(0) : block.forward[s - 1] + costs.forward + lag(s - 1, s);
    if (lower) ready = max(ready, lower->forward[s]);
    block.forward[s] = place(block.placement[s], ready, false);
  }
  for (int s = n - 1; s >= 0; --s) {
    Time ready = s == n - 1 ? block.forward[s] + costs.forward : block.backward[s + 1] + costs.backward + lag(s + 1, s);
    if (lower) ready = max(ready, lower->backward[s]);
    block.backward[s] = place(block.placement[s], ready, true);
    block.weight[s] = block.backward[s] + costs.backward;
  }
  return block;
}

Time TotalLifespan(const BuildingBlock& b) {
  Time t = 0;
  for (int s = 0; s < b.num_stages(); ++s) t += Lifespan(b, s);
  return t;
}

}  // namespace

BuildingBlock POBlock(int d, int v, const PassCosts& costs) {
  costs.Validate();
  BuildingBlock gish = GISHBlock(d, v, costs);
  BuildingBlock guided = CycleBlock(d, v, costs, &gish);
  BuildingBlock plain = CycleBlock(d, v, costs, nullptr);
  return TotalLifespan(plain) < TotalLifespan(guided) ? plain : guided;
}

Schedule BuildPO(int d, int v, int m, const PassCosts& costs) {
  CheckShape(d, v, m);
  BuildingBlock block = POBlock(d, v, costs);
  Schedule s = UniformRepeat(block, m, Time(v) * costs.total());
  RetimeAsap(s, costs.comm);
  s.name = "po";
  return s;
}

OffloadedSchedule Build1F1BFullOffload(int d, int m, const PassCosts& costs, const Time& round_trip) {
  OffloadedSchedule out;
  out.schedule = Build1F1B(d, 1, m, costs);
  out.schedule.name = "1f1b-offload";
  out.plan = PlanSlots(out.schedule, {0}, round_trip);
  return out;
}

Schedule BuildSchedule(ScheduleKind kind, int d, int v, int m, int g, const PassCosts& costs,
                       const BuilderOptions& options) {
  switch (kind) {
    case ScheduleKind::kOneFOneB:
    case ScheduleKind::kOneFOneBFullOffload:
      return Build1F1B(d, v, m, costs);
    case ScheduleKind::kInterleaved1F1B:
      return BuildInterleaved1F1B(d, v, m, costs);
    case ScheduleKind::kGIS:
      return BuildGIS(d, v, m, costs, options);
    case ScheduleKind::kGISG:
      return BuildGISG(d, v, m, g, costs, options);
    case ScheduleKind::kGISH:
      return BuildGISH(d, v, m, costs, options);
    case ScheduleKind::kPO:
      return BuildPO(d, v, m, costs);
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown schedule kind");
}

}  // namespace ppoff
