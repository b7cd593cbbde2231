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

#include "ppoff/composition.h"

#include <algorithm>
#include <tuple>
#include <unordered_map>

#include "ppoff/error.h"

namespace ppoff {

std::vector<std::pair<int, int>> GroupedForwardOrder(int m, int v, int g) {
  std::vector<std::pair<int, int>> seq;
  seq.reserve(static_cast<std::size_t>(m) * v);
  for (int q = 0; q * g < m; ++q) {
    int size = std::min(g, m - q * g);
    for (int c = 0; c < v; ++c)
      for (int r = 0; r < size; ++r) seq.emplace_back(c, q * g + r);
  }
  return seq;
}

Schedule ComposeInterleaved(const InterleavedParams& p) {
  if (p.d < 1 || p.v < 1 || p.m < 0 || p.g < 1) throw Error(ErrorCode::kInvalidConfig, "bad shape");
  Schedule sched;
  sched.name = p.name;
  sched.d = p.d;
  sched.v = p.v;
  sched.m = p.m;
  sched.placement = RoundRobinPlacement(p.d, p.v);
  sched.stage_weight.assign(sched.placement.size(), 1);
  sched.split_backward = p.split_backward;
  sched.composition = Composition::kInterleaving;
  sched.group = p.g;
  sched.device_passes.resize(p.d);
  auto order = GroupedForwardOrder(p.m, p.v, p.g);
  for (int i = 0; i < p.d; ++i) {
    auto& list = sched.device_passes[i];
    auto fwd = [&](std::size_t k) {
      auto [c, mb] = order[k];
      return Pass{PassKind::kForward, i, c * p.d + i, mb, 0, p.forward};
    };
    auto bwd = [&](std::size_t k, PassKind kind) {
      auto [c, mb] = order[k];
      return Pass{kind, i, (p.v - 1 - c) * p.d + i, mb, 0,
                  kind == PassKind::kBackward ? p.backward : p.weight};
    };
    std::size_t warm = std::min<std::size_t>(std::max(0, p.warmup(i)), order.size());
    std::size_t fi = 0;
    for (; fi < warm; ++fi) list.push_back(fwd(fi));
    for (std::size_t bi = 0; bi < order.size(); ++bi) {
      list.push_back(bwd(bi, PassKind::kBackward));
      if (p.split_backward) list.push_back(bwd(bi, PassKind::kWeight));
      if (fi < order.size()) list.push_back(fwd(fi++));
    }
  }
  RetimeAsap(sched, p.comm);
  return sched;
}

std::vector<Pass> UniformRepeatNominal(const BuildingBlock& block, int m, const Time& interval) {
  std::vector<Pass> out;
  for (int j = 0; j < m; ++j) {
    Time shift = interval * Time(j);
    for (int s = 0; s < block.num_stages(); ++s) {
      int dev = block.placement[s];
      out.push_back({PassKind::kForward, dev, s, j, block.forward[s] + shift, block.forward_duration});
      out.push_back({PassKind::kBackward, dev, s, j, block.backward[s] + shift, block.backward_duration});
      if (block.split())
        out.push_back({PassKind::kWeight, dev, s, j, block.weight[s] + shift, block.weight_duration});
    }
  }
  return out;
}

Schedule UniformRepeat(const BuildingBlock& block, int m, const Time& interval) {
  if (!(interval > 0)) throw Error(ErrorCode::kInfeasibleInterval, "interval must be positive");
  Schedule sched;
  sched.name = "uniform-repeat";
  sched.d = block.d;
  sched.v = block.v;
  sched.m = m;
  sched.placement = block.placement;
  sched.stage_weight.assign(block.placement.size(), 1);
  sched.split_backward = block.split();
  sched.composition = Composition::kUniformRepeat;
  sched.interval = interval;
  sched.device_passes.resize(block.d);

  std::vector<Pass> nominal = UniformRepeatNominal(block, m, interval);
  auto rank = [](const Pass& p) {
    // F flows up the chain and B down it; keep that order among exact ties.
    int kind = p.kind == PassKind::kForward ? 0 : p.kind == PassKind::kBackward ? 1 : 2;
    int stage = p.kind == PassKind::kForward ? p.stage : -p.stage;
    return std::make_tuple(p.start, p.microbatch, kind, stage);
  };
  std::stable_sort(nominal.begin(), nominal.end(),
                   [&](const Pass& a, const Pass& b) { return rank(a) < rank(b); });
  std::unordered_map<PassKey, Time, PassKeyHash> release;
  for (const Pass& p : nominal) {
    sched.device_passes[p.device].push_back(p);
    release[PassKey{p.kind, p.stage, p.microbatch}] = p.start;
  }
  RetimeAsap(sched, block.comm,
             [&](const Pass& p) { return release.at(PassKey{p.kind, p.stage, p.microbatch}); });
  Time limit = Time(m) * block.Span();
  for (const auto& dp : sched.device_passes)
    for (const Pass& p : dp)
      if (p.start - release.at(PassKey{p.kind, p.stage, p.microbatch}) > limit)
        throw Error(ErrorCode::kInfeasibleInterval,
                    "collision repair did not settle; interval " + interval.to_string() + " is too short");
  return sched;
}

Schedule InterleaveCompose(const BuildingBlock& block, int d, int v, int g, int m) {
  int lo = (d + 1) / 2;
  if (g < lo || g > d)
    throw Error(ErrorCode::kInvalidG, "g=" + std::to_string(g) + " outside [" + std::to_string(lo) + ", " +
                                          std::to_string(d) + "]");
  if (block.d != d || block.v != v || block.placement != RoundRobinPlacement(d, v))
    throw Error(ErrorCode::kInvalidConfig, "block shape does not match d and v");
  InterleavedParams p;
  p.name = "interleave";
  p.d = d;
  p.v = v;
  p.m = m;
  p.g = g;
  p.warmup = [=](int i) { return g * (v - 1) + d - i; };
  p.split_backward = block.split();
  p.forward = block.forward_duration;
  p.backward = block.backward_duration;
  p.weight = block.weight_duration;
  p.comm = block.comm;
  return ComposeInterleaved(p);
}

int WarmupForwards(const Schedule& sched, int device) {
  int n = 0;
  for (const Pass& p : sched.device_passes.at(device)) {
    if (p.kind == PassKind::kBackward) return n;
    n += p.kind == PassKind::kForward;
  }
  return n;
}

}  // namespace ppoff
