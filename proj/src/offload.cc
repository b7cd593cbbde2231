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

#include "ppoff/offload.h"

#include <algorithm>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <queue>
#include <tuple>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ppoff/error.h"

namespace ppoff {

std::size_t OffloadPlan::num_transfers() const {
  std::size_t n = 0;
  for (const auto& s : streams) n += s.transfers.size();
  return n;
}

const Transfer* OffloadPlan::Find(Direction dir, int stage, int microbatch) const {
  for (const auto& s : streams)
    for (const Transfer& t : s.transfers)
      if (t.dir == dir && t.stage == stage && t.microbatch == microbatch) return &t;
  return nullptr;
}

std::vector<int> SelectOffloadStages(const BuildingBlock& block, int n) {
  if (n < 0 || n > block.v) throw Error(ErrorCode::kInvalidConfig, "offload count must be in [0, v]");
  std::vector<Time> life(block.v, Time(0));
  std::vector<int> seen(block.d, 0);
  for (int s = 0; s < block.num_stages(); ++s) {
    int local = seen[block.placement[s]]++;
    life.at(local) += Lifespan(block, s);
  }
  std::vector<int> order(block.v);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return life[a] > life[b]; });
  order.resize(n);
  std::sort(order.begin(), order.end());
  return order;
}

namespace {

struct PairTimes {
  Time f_end;
  Time b_start;
  StageMicrobatch key;
};

DeviceStream PlanDevice(const Schedule& sched, const PassIndex& index, int dev, const std::vector<int>& stages,
                        const Time& round_trip, const Time& origin, std::vector<StageMicrobatch>& skipped,
                        std::vector<StageMicrobatch>& infeasible) {
  DeviceStream stream;
  stream.origin = origin;
  Time w = round_trip / Time(2);
  std::set<int> offloaded(stages.begin(), stages.end());
  std::vector<PairTimes> pairs;
  for (const Pass& p : sched.device_passes[dev]) {
    if (p.kind != PassKind::kForward || !offloaded.count(p.stage)) continue;
    const Pass* b = index.Find(PassKind::kBackward, p.stage, p.microbatch);
    if (b == nullptr) continue;
    StageMicrobatch key{p.stage, p.microbatch};
    // The gap must also hold a whole D2H slot followed by an H2D slot on
    // this device's grid, which a shifted grid may not.
    std::int64_t first_d2h = ((p.end() - origin) / w).ceil();
    if (first_d2h % 2 != 0) ++first_d2h;
    bool fits = origin + Time(first_d2h + 2) * w <= b->start;
    if (b->start - p.end() < round_trip || !fits)
      skipped.push_back(key);
    else
      pairs.push_back({p.end(), b->start, key});
  }
  std::set<std::int64_t> used;
  std::map<StageMicrobatch, std::int64_t> d2h;
  auto emit = [&](Direction dir, const StageMicrobatch& key, std::int64_t j) {
    used.insert(j);
    stream.transfers.push_back({dir, dev, key.stage, key.microbatch, origin + Time(j) * w, w, j});
  };
  // Offloads, left to right: each D2H slot goes to the waiting pair whose B
  // comes first.
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const PairTimes& a, const PairTimes& b) { return a.f_end < b.f_end; });
  {
    auto later_b = [](const PairTimes* a, const PairTimes* b) {
      return std::tie(b->b_start, b->key) < std::tie(a->b_start, a->key);
    };
    std::priority_queue<const PairTimes*, std::vector<const PairTimes*>, decltype(later_b)> ready(later_b);
    std::size_t next = 0;
    std::int64_t j = 0;
    while (next < pairs.size() || !ready.empty()) {
      if (ready.empty()) {
        std::int64_t first = ((pairs[next].f_end - origin) / w).ceil();
        if (first % 2 != 0) ++first;
        j = std::max(j, first);
      }
      while (next < pairs.size() && pairs[next].f_end <= origin + Time(j) * w) ready.push(&pairs[next++]);
      const PairTimes* p = ready.top();
      ready.pop();
      d2h[p->key] = j;
      emit(Direction::kD2H, p->key, j);
      j += 2;
    }
  }
  // Reloads, right to left: each H2D slot goes to the pair, among those
  // whose B is still ahead, whose offload finished last.
  auto deadline = [&](const PairTimes& p) {
    std::int64_t j = ((p.b_start - origin) / w).floor() - 1;
    if (j % 2 == 0) --j;
    return j;
  };
  std::stable_sort(pairs.begin(), pairs.end(), [&](const PairTimes& a, const PairTimes& b) {
    return deadline(a) > deadline(b);
  });
  std::vector<const PairTimes*> forced;
  {
    auto earlier_d2h = [&](const PairTimes* a, const PairTimes* b) {
      return std::tie(d2h.at(a->key), a->key) < std::tie(d2h.at(b->key), b->key);
    };
    std::priority_queue<const PairTimes*, std::vector<const PairTimes*>, decltype(earlier_d2h)> ready(earlier_d2h);
    std::size_t next = 0;
    std::int64_t j = 0;
    bool started = false;
    while (next < pairs.size() || !ready.empty()) {
      if (ready.empty()) {
        j = started ? std::min(j, deadline(pairs[next])) : deadline(pairs[next]);
        started = true;
      }
      while (next < pairs.size() && deadline(pairs[next]) >= j) ready.push(&pairs[next++]);
      const PairTimes* p = ready.top();
      ready.pop();
      if (d2h.at(p->key) >= j) {
        forced.push_back(p);  // no slot left between its offload and its B
        continue;
      }
      emit(Direction::kH2D, p->key, j);
      j -= 2;
    }
  }
  std::sort(forced.begin(), forced.end(),
            [&](const PairTimes* a, const PairTimes* b) { return d2h.at(a->key) < d2h.at(b->key); });
  for (const PairTimes* p : forced) {
    infeasible.push_back(p->key);
    std::int64_t j = d2h.at(p->key) + 1;
    while (used.count(j)) j += 2;
    emit(Direction::kH2D, p->key, j);
  }
  std::sort(stream.transfers.begin(), stream.transfers.end(),
            [](const Transfer& a, const Transfer& b) { return a.slot < b.slot; });
  return stream;
}

// Slot 0 opens when the device's first pass completes; nothing can be
// offloaded before that.
Time FirstPassEnd(const Schedule& sched, int dev) {
  const auto& list = sched.device_passes[dev];
  if (list.empty()) return 0;
  const Pass* first = &list.front();
  for (const Pass& p : list)
    if (p.start < first->start) first = &p;
  return first->end();
}

}  // namespace

OffloadPlan PlanSlots(const Schedule& sched, const std::vector<int>& local_stages, const Time& round_trip,
                      const std::vector<std::optional<Time>>& origins) {
  if (!(round_trip > 0)) throw Error(ErrorCode::kInvalidConfig, "round trip must be positive");
  OffloadPlan plan;
  plan.d = sched.d;
  plan.round_trip = round_trip;
  plan.slot_width = round_trip / Time(2);
  plan.offloaded_stages.resize(sched.d);
  plan.streams.resize(sched.d);
  std::set<int> wanted(local_stages.begin(), local_stages.end());
  PassIndex index(sched);
  for (int dev = 0; dev < sched.d; ++dev) {
    std::vector<int> stages = sched.DeviceStages(dev);
    for (std::size_t i = 0; i < stages.size(); ++i)
      if (wanted.count(static_cast<int>(i))) plan.offloaded_stages[dev].push_back(stages[i]);
    Time origin = FirstPassEnd(sched, dev);
    if (dev < static_cast<int>(origins.size()) && origins[dev]) origin = *origins[dev];
    plan.streams[dev] =
        PlanDevice(sched, index, dev, plan.offloaded_stages[dev], round_trip, origin, plan.skipped, plan.infeasible);
  }
  std::sort(plan.skipped.begin(), plan.skipped.end());
  std::sort(plan.infeasible.begin(), plan.infeasible.end());
  return plan;
}

OffloadPlan ApplyTopologySync(const Schedule& sched, const OffloadPlan& plan, const HardwareSpec& hw) {
  OffloadPlan out = plan;
  if (hw.devices_per_switch != 2) {
    out.notice = "topology sync needs two devices per switch; plan left unchanged";
    return out;
  }
  if (plan.d == 0 || !(plan.round_trip > 0)) return out;
  Time w = plan.slot_width;
  std::vector<std::optional<Time>> origins(plan.d);
  for (int p = 0; p + 1 < plan.d; p += 2) {
    // Odd slots of the primary line up with even slots of the partner.
    Time target = plan.streams[p].origin + w;
    Time first = FirstPassEnd(sched, p + 1);
    std::int64_t k = ((first - target) / (Time(2) * w)).floor();
    origins[p + 1] = target + Time(2 * k) * w;
  }
  // Re-plan partners on their shifted grids; primaries keep their streams.
  std::set<int> locals;
  for (int dev = 0; dev < plan.d; ++dev)
    for (int s : plan.offloaded_stages[dev]) locals.insert(sched.LocalIndex(s));
  OffloadPlan shifted = PlanSlots(sched, std::vector<int>(locals.begin(), locals.end()), plan.round_trip, origins);
  for (int dev = 1; dev < plan.d; dev += 2) out.streams[dev] = shifted.streams[dev];
  std::set<StageMicrobatch> infeasible, skipped;
  for (int dev = 0; dev < plan.d; ++dev) {
    const OffloadPlan& src = dev % 2 == 1 ? shifted : plan;
    std::set<int> mine(plan.offloaded_stages[dev].begin(), plan.offloaded_stages[dev].end());
    for (const auto& x : src.infeasible)
      if (mine.count(x.stage)) infeasible.insert(x);
    for (const auto& x : src.skipped)
      if (mine.count(x.stage)) skipped.insert(x);
  }
  out.infeasible.assign(infeasible.begin(), infeasible.end());
  out.skipped.assign(skipped.begin(), skipped.end());

  out.sync_edges.clear();
  auto is_forced = [&](const Transfer& t) {
    return infeasible.count(StageMicrobatch{t.stage, t.microbatch}) != 0;
  };
  for (int p = 0; p + 1 < plan.d; p += 2) {
    for (int a : {p, p + 1}) {
      int b = a == p ? p + 1 : p;
      const auto& mine = out.streams[a].transfers;
      const auto& theirs = out.streams[b].transfers;
      for (std::size_t i = 0; i < mine.size(); ++i) {
        if (is_forced(mine[i])) continue;
        std::optional<std::size_t> best;
        for (std::size_t j = 0; j < theirs.size(); ++j) {
          if (is_forced(theirs[j]) || theirs[j].end() > mine[i].start) continue;
          if (!best || theirs[j].end() > theirs[*best].end()) best = j;
        }
        if (best) out.sync_edges.push_back({a, i, b, *best});
      }
    }
  }
  out.synchronized = true;
  return out;
}

Time PlannedSameDirectionOverlap(const OffloadPlan& plan, int devices_per_switch) {
  Time total = 0;
  if (devices_per_switch < 2) return total;
  for (int a = 0; a < plan.d; ++a) {
    for (int b = a + 1; b < plan.d && b / devices_per_switch == a / devices_per_switch; ++b) {
      for (const Transfer& x : plan.streams[a].transfers)
        for (const Transfer& y : plan.streams[b].transfers) {
          if (x.dir != y.dir) continue;
          Time lo = max(x.start, y.start), hi = min(x.end(), y.end());
          if (lo < hi) total += hi - lo;
        }
    }
  }
  return total;
}

void WritePlan(std::ostream& os, const OffloadPlan& plan) {
  os << "# ppoff plan\n";
  os << "# d " << plan.d << " round_trip " << plan.round_trip << " synchronized " << (plan.synchronized ? 1 : 0)
     << '\n';
  for (int dev = 0; dev < plan.d; ++dev) {
    os << "# stream " << dev << " origin " << plan.streams[dev].origin << " stages";
    for (int s : plan.offloaded_stages[dev]) os << ' ' << s;
    os << '\n';
  }
  for (const auto& x : plan.skipped) os << "# skip " << x.stage << ' ' << x.microbatch << '\n';
  for (const auto& x : plan.infeasible) os << "# infeasible " << x.stage << ' ' << x.microbatch << '\n';
  for (const auto& e : plan.sync_edges)
    os << "# sync " << e.device << ' ' << e.index << ' ' << e.partner << ' ' << e.partner_index << '\n';
  for (const auto& s : plan.streams)
    for (const Transfer& t : s.transfers)
      os << t.device << ' ' << t.stage << ' ' << t.microbatch << ' '
         << (t.dir == Direction::kD2H ? "OFFLOAD" : "RELOAD") << ' ' << t.start << ' ' << t.duration << '\n';
}

std::string PlanToString(const OffloadPlan& plan) {
  std::ostringstream os;
  WritePlan(os, plan);
  return os.str();
}

OffloadPlan ParsePlan(std::istream& is) {
  OffloadPlan plan;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kParse, "line " + std::to_string(lineno) + ": " + what);
  };
  auto rat = [&](const std::string& s) {
    try {
      return Rational::parse(s);
    } catch (const std::exception& e) {
      fail(e.what());
    }
    return Rational();
  };
  std::vector<Transfer> transfers;
  while (std::getline(is, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    std::istringstream ls(line.substr(first));
    if (line[first] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "d") {
        std::string k1, rt, k2;
        int sync = 0;
        if (!(ls >> plan.d >> k1 >> rt >> k2 >> sync)) fail("bad plan header");
        plan.round_trip = rat(rt);
        plan.slot_width = plan.round_trip / Time(2);
        plan.synchronized = sync != 0;
        plan.streams.assign(plan.d, {});
        plan.offloaded_stages.assign(plan.d, {});
      } else if (key == "stream") {
        int dev;
        std::string k1, origin, k2;
        if (!(ls >> dev >> k1 >> origin >> k2) || dev < 0 || dev >= plan.d) fail("bad stream header");
        plan.streams[dev].origin = rat(origin);
        int s;
        while (ls >> s) plan.offloaded_stages[dev].push_back(s);
      } else if (key == "skip" || key == "infeasible") {
        StageMicrobatch x;
        if (!(ls >> x.stage >> x.microbatch)) fail("bad " + key + " line");
        (key == "skip" ? plan.skipped : plan.infeasible).push_back(x);
      } else if (key == "sync") {
        SyncEdge e;
        if (!(ls >> e.device >> e.index >> e.partner >> e.partner_index)) fail("bad sync line");
        plan.sync_edges.push_back(e);
      }
      continue;
    }
    Transfer t;
    std::string kind, start, dur;
    if (!(ls >> t.device >> t.stage >> t.microbatch >> kind >> start >> dur))
      fail("expected 'device stage microbatch kind start duration'");
    if (kind != "OFFLOAD" && kind != "RELOAD") continue;
    t.dir = kind == "OFFLOAD" ? Direction::kD2H : Direction::kH2D;
    t.start = rat(start);
    t.duration = rat(dur);
    transfers.push_back(t);
  }
  for (Transfer& t : transfers) {
    if (t.device < 0) fail("negative device");
    if (t.device >= plan.d) {
      plan.d = t.device + 1;
      plan.streams.resize(plan.d);
      plan.offloaded_stages.resize(plan.d);
    }
    if (plan.slot_width > 0) t.slot = ((t.start - plan.streams[t.device].origin) / plan.slot_width).floor();
    plan.streams[t.device].transfers.push_back(t);
  }
  return plan;
}

std::int64_t HostBufferLayout::total() const { return std::accumulate(bins.begin(), bins.end(), std::int64_t{0}); }

std::string HostBufferLayout::ToJson() const {
  nlohmann::json j;
  j["bins"] = bins;
  j["total"] = total();
  j["tensors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < sizes.size(); ++i)
    j["tensors"].push_back({{"size", sizes[i]}, {"bin", placements[i].bin}, {"offset", placements[i].offset}});
  return j.dump(2);
}

std::int64_t NextPowerOfTwo(std::int64_t x) {
  std::int64_t p = 1;
  while (p < x) p <<= 1;
  return p;
}

std::int64_t NaiveRoundUpTotal(const std::vector<std::int64_t>& sizes) {
  std::int64_t t = 0;
  for (auto s : sizes) t += NextPowerOfTwo(s);
  return t;
}

namespace {

struct BinCombo {
  std::int64_t total;
  int count;
  std::int64_t bins[3];  // non-increasing
};

// Every multiset of one to three powers of two up to 2^61, by total then
// bin count.
const std::vector<BinCombo>& AllCombos() {
  static const std::vector<BinCombo> combos = [] {
    std::vector<BinCombo> out;
    constexpr int kMaxExp = 61;
    for (int a = 0; a <= kMaxExp; ++a) {
      std::int64_t pa = std::int64_t{1} << a;
      out.push_back({pa, 1, {pa, 0, 0}});
      for (int b = 0; b <= a; ++b) {
        std::int64_t pb = std::int64_t{1} << b;
        out.push_back({pa + pb, 2, {pa, pb, 0}});
        for (int c = 0; c <= b; ++c) {
          std::int64_t pc = std::int64_t{1} << c;
          out.push_back({pa + pb + pc, 3, {pa, pb, pc}});
        }
      }
    }
    std::sort(out.begin(), out.end(), [](const BinCombo& x, const BinCombo& y) {
      if (x.total != y.total) return x.total < y.total;
      if (x.count != y.count) return x.count < y.count;
      return std::lexicographical_compare(x.bins, x.bins + 3, y.bins, y.bins + 3, std::greater<>());
    });
    return out;
  }();
  return combos;
}

}  // namespace

HostBufferLayout PackHostBins(const std::vector<std::int64_t>& sizes) {
  HostBufferLayout layout;
  layout.sizes = sizes;
  layout.placements.resize(sizes.size());
  if (sizes.empty()) return layout;
  std::int64_t sum = 0, largest = 0;
  for (auto s : sizes) {
    if (s <= 0) throw Error(ErrorCode::kInvalidConfig, "tensor sizes must be positive");
    sum += s;
    largest = std::max(largest, s);
  }
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
  const auto& combos = AllCombos();
  auto it = std::lower_bound(combos.begin(), combos.end(), sum,
                             [](const BinCombo& c, std::int64_t v) { return c.total < v; });
  std::int64_t fill[3];
  std::vector<int> bin_of(sizes.size());
  auto ffd = [&](const BinCombo& c) {
    std::fill(fill, fill + 3, 0);
    for (std::size_t idx : order) {
      int k = 0;
      while (k < c.count && fill[k] + sizes[idx] > c.bins[k]) ++k;
      if (k == c.count) return false;
      bin_of[idx] = k;
      fill[k] += sizes[idx];
    }
    return true;
  };
  // Exact search behind FFD, bounded so long lists stay fast.
  std::int64_t budget = 2'000'000;
  auto exact = [&](const BinCombo& c) {
    std::int64_t nodes = 0;
    std::fill(fill, fill + 3, 0);
    std::function<bool(std::size_t)> place = [&](std::size_t i) {
      if (i == order.size()) return true;
      if (++nodes > 20'000 || --budget < 0) return false;
      std::int64_t sz = sizes[order[i]];
      for (int k = 0; k < c.count; ++k) {
        if (fill[k] + sz > c.bins[k]) continue;
        bool seen = false;  // an identical bin was already tried
        for (int j = 0; j < k; ++j) seen |= c.bins[j] == c.bins[k] && fill[j] == fill[k];
        if (seen) continue;
        fill[k] += sz;
        bin_of[order[i]] = k;
        if (place(i + 1)) return true;
        fill[k] -= sz;
      }
      return false;
    };
    return place(0);
  };
  for (; it != combos.end(); ++it) {
    if (it->bins[0] < largest) continue;
    if (!ffd(*it) && !(budget > 0 && exact(*it))) continue;
    std::fill(fill, fill + 3, 0);
    for (std::size_t idx : order) {
      layout.placements[idx] = {bin_of[idx], fill[bin_of[idx]]};
      fill[bin_of[idx]] += sizes[idx];
    }
    layout.bins.assign(it->bins, it->bins + it->count);
    return layout;
  }
  throw Error(ErrorCode::kInvalidConfig, "tensors do not fit in three bins");
}

std::vector<int> NodeAssignment::Ranks(int node) const {
  std::vector<int> out;
  for (int r = 0; r < static_cast<int>(node_of_rank.size()); ++r)
    if (node_of_rank[r] == node) out.push_back(r);
  return out;
}

namespace {

void CheckNodes(int d, int num_nodes) {
  if (num_nodes < 1 || d < 1 || d % num_nodes != 0)
    throw Error(ErrorCode::kInvalidConfig, "d must be a positive multiple of num_nodes");
}

}  // namespace

NodeAssignment AssignRanksToNodes(int d, int num_nodes) {
  CheckNodes(d, num_nodes);
  NodeAssignment a;
  a.num_nodes = num_nodes;
  a.node_of_rank.resize(d);
  int per = d / num_nodes;
  for (int k = 0; k < d; ++k) {
    int rank = k % 2 == 0 ? k / 2 : d - 1 - k / 2;
    a.node_of_rank[rank] = k / per;
  }
  return a;
}

NodeAssignment ContiguousAssignment(int d, int num_nodes) {
  CheckNodes(d, num_nodes);
  NodeAssignment a;
  a.num_nodes = num_nodes;
  a.node_of_rank.resize(d);
  for (int r = 0; r < d; ++r) a.node_of_rank[r] = r / (d / num_nodes);
  return a;
}

}  // namespace ppoff
