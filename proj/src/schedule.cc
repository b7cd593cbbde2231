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

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "ppoff/error.h"

namespace ppoff {

const char* PassKindName(PassKind kind) {
  switch (kind) {
    case PassKind::kForward:
      return "F";
    case PassKind::kBackward:
      return "B";
    case PassKind::kWeight:
      return "W";
    case PassKind::kOffload:
      return "OFFLOAD";
    case PassKind::kReload:
      return "RELOAD";
  }
  return "?";
}

std::optional<PassKind> ParsePassKind(const std::string& text) {
  for (PassKind k : {PassKind::kForward, PassKind::kBackward, PassKind::kWeight,
                     PassKind::kOffload, PassKind::kReload}) {
    if (text == PassKindName(k)) return k;
  }
  return std::nullopt;
}

std::vector<int> RoundRobinPlacement(int d, int v) {
  std::vector<int> placement(static_cast<std::size_t>(d) * v);
  for (std::size_t s = 0; s < placement.size(); ++s) placement[s] = static_cast<int>(s) % d;
  return placement;
}

int Schedule::LocalIndex(int stage) const {
  int dev = placement.at(stage);
  int idx = 0;
  for (int s = 0; s < stage; ++s) idx += placement[s] == dev;
  return idx;
}

std::vector<int> Schedule::DeviceStages(int device) const {
  std::vector<int> out;
  for (int s = 0; s < num_stages(); ++s)
    if (placement[s] == device) out.push_back(s);
  return out;
}

std::size_t Schedule::num_passes() const {
  std::size_t n = 0;
  for (const auto& dp : device_passes) n += dp.size();
  return n;
}

Time Schedule::Makespan() const {
  Time mk = 0;
  for (const auto& dp : device_passes)
    for (const Pass& p : dp) mk = max(mk, p.end());
  return mk;
}

PassIndex::PassIndex(const Schedule& sched) {
  map_.reserve(sched.num_passes());
  for (const auto& dp : sched.device_passes)
    for (const Pass& p : dp) map_.emplace(PassKey{p.kind, p.stage, p.microbatch}, &p);
}

const Pass* PassIndex::Find(PassKind kind, int stage, int microbatch) const {
  auto it = map_.find(PassKey{kind, stage, microbatch});
  return it == map_.end() ? nullptr : it->second;
}

namespace {

// The pass that must finish before `key` may start, if any.
std::optional<PassKey> Predecessor(const PassKey& key, int num_stages) {
  switch (key.kind) {
    case PassKind::kForward:
      if (key.stage == 0) return std::nullopt;
      return PassKey{PassKind::kForward, key.stage - 1, key.microbatch};
    case PassKind::kBackward:
      if (key.stage == num_stages - 1) return PassKey{PassKind::kForward, key.stage, key.microbatch};
      return PassKey{PassKind::kBackward, key.stage + 1, key.microbatch};
    case PassKind::kWeight:
      return PassKey{PassKind::kBackward, key.stage, key.microbatch};
    default:
      return std::nullopt;
  }
}

std::string Describe(PassKind kind, int stage, int mb) {
  std::ostringstream os;
  os << PassKindName(kind) << "(stage " << stage << ", mb " << mb << ")";
  return os.str();
}

std::string Describe(const Pass& p) { return Describe(p.kind, p.stage, p.microbatch); }

}  // namespace

Time BuildingBlock::Span() const {
  Time span = 0;
  for (int s = 0; s < num_stages(); ++s) {
    span = max(span, forward[s] + forward_duration);
    span = max(span, backward[s] + backward_duration);
    if (split()) span = max(span, weight[s] + weight_duration);
  }
  return span;
}

Time Lifespan(const BuildingBlock& block, int stage) {
  return block.backward.at(stage) + block.backward_duration - block.forward.at(stage);
}

std::vector<std::string> CheckBlock(const BuildingBlock& block) {
  std::vector<std::string> issues;
  int n = block.num_stages();
  if (static_cast<int>(block.forward.size()) != n || static_cast<int>(block.backward.size()) != n ||
      (block.split() && static_cast<int>(block.weight.size()) != n)) {
    issues.push_back("offset vectors do not match the number of stages");
    return issues;
  }
  auto lag = [&](int a, int b) { return block.placement[a] == block.placement[b] ? Time(0) : block.comm; };
  for (int s = 0; s < n; ++s) {
    if (s == n - 1 && block.backward[s] < block.forward[s] + block.forward_duration)
      issues.push_back("B before F on the last stage");
    if (block.split() && block.weight[s] < block.backward[s] + block.backward_duration)
      issues.push_back("W before B on stage " + std::to_string(s));
    if (s > 0) {
      if (block.forward[s] < block.forward[s - 1]) issues.push_back("F offsets decrease at stage " + std::to_string(s));
      if (block.forward[s] < block.forward[s - 1] + block.forward_duration + lag(s - 1, s))
        issues.push_back("F of stage " + std::to_string(s) + " starts before its input arrives");
      if (block.backward[s - 1] < block.backward[s])
        issues.push_back("B offsets increase at stage " + std::to_string(s));
      if (block.backward[s - 1] < block.backward[s] + block.backward_duration + lag(s, s - 1))
        issues.push_back("B of stage " + std::to_string(s - 1) + " starts before its input arrives");
    }
  }
  // Passes of one microbatch sharing a device must not overlap.
  std::map<int, std::vector<std::pair<Time, Time>>> by_dev;
  for (int s = 0; s < n; ++s) {
    auto& v = by_dev[block.placement[s]];
    v.emplace_back(block.forward[s], block.forward[s] + block.forward_duration);
    v.emplace_back(block.backward[s], block.backward[s] + block.backward_duration);
    if (block.split()) v.emplace_back(block.weight[s], block.weight[s] + block.weight_duration);
  }
  for (auto& [dev, v] : by_dev) {
    std::sort(v.begin(), v.end());
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i].first < v[i - 1].second) {
        issues.push_back("passes overlap on device " + std::to_string(dev));
        break;
      }
  }
  return issues;
}

BuildingBlock ExtractBlock(const Schedule& sched, int microbatch, Time comm) {
  PassIndex index(sched);
  BuildingBlock block;
  block.d = sched.d;
  block.v = sched.v;
  block.placement = sched.placement;
  block.comm = comm;
  int n = sched.num_stages();
  const Pass* f0 = index.Find(PassKind::kForward, 0, microbatch);
  if (f0 == nullptr) throw Error(ErrorCode::kInvalidConfig, "microbatch not in schedule");
  Time base = f0->start;
  block.forward.resize(n);
  block.backward.resize(n);
  if (sched.split_backward) block.weight.resize(n);
  for (int s = 0; s < n; ++s) {
    const Pass* f = index.Find(PassKind::kForward, s, microbatch);
    const Pass* b = index.Find(PassKind::kBackward, s, microbatch);
    if (f == nullptr || b == nullptr) throw Error(ErrorCode::kInvalidConfig, "incomplete microbatch");
    block.forward[s] = f->start - base;
    block.backward[s] = b->start - base;
    block.forward_duration = f->duration;
    block.backward_duration = b->duration;
    if (sched.split_backward) {
      const Pass* w = index.Find(PassKind::kWeight, s, microbatch);
      if (w == nullptr) throw Error(ErrorCode::kInvalidConfig, "incomplete microbatch");
      block.weight[s] = w->start - base;
      block.weight_duration = w->duration;
    }
  }
  return block;
}

BuildingBlock MostFrequentBlock(const Schedule& sched, Time comm) {
  if (sched.m == 0) throw Error(ErrorCode::kInvalidConfig, "empty schedule has no block");
  std::map<std::string, std::pair<int, int>> seen;  // pattern -> (count, first microbatch)
  for (int mb = 0; mb < sched.m; ++mb) {
    BuildingBlock b = ExtractBlock(sched, mb, comm);
    std::ostringstream key;
    for (int s = 0; s < b.num_stages(); ++s) {
      key << b.forward[s] << ',' << b.backward[s];
      if (b.split()) key << ',' << b.weight[s];
      key << ';';
    }
    auto [it, inserted] = seen.emplace(key.str(), std::make_pair(0, mb));
    it->second.first++;
  }
  int best_mb = 0, best_count = -1;
  for (const auto& [key, cm] : seen) {
    if (cm.first > best_count || (cm.first == best_count && cm.second < best_mb)) {
      best_count = cm.first;
      best_mb = cm.second;
    }
  }
  return ExtractBlock(sched, best_mb, comm);
}

std::vector<Violation> Validate(const Schedule& sched, const PassCosts& costs) {
  std::vector<Violation> out;
  int n = sched.num_stages();
  std::unordered_map<PassKey, int, PassKeyHash> count;
  std::unordered_map<PassKey, const Pass*, PassKeyHash> where;
  for (int dev = 0; dev < static_cast<int>(sched.device_passes.size()); ++dev) {
    for (const Pass& p : sched.device_passes[dev]) {
      if (p.stage < 0 || p.stage >= n || p.microbatch < 0 || p.microbatch >= sched.m ||
          p.kind == PassKind::kOffload || p.kind == PassKind::kReload) {
        out.push_back({ViolationKind::kPlacement, Describe(p) + " is outside the schedule"});
        continue;
      }
      if (p.device != dev || sched.placement[p.stage] != dev) {
        out.push_back({ViolationKind::kPlacement,
                       Describe(p) + " listed on device " + std::to_string(dev) +
                           " but its stage lives on device " + std::to_string(sched.placement[p.stage])});
      }
      if (p.kind == PassKind::kWeight && !sched.split_backward) {
        out.push_back({ViolationKind::kDuplicate, Describe(p) + " present without split backward"});
        continue;
      }
      if (p.duration < 0) out.push_back({ViolationKind::kPlacement, Describe(p) + " has negative duration"});
      PassKey key{p.kind, p.stage, p.microbatch};
      if (++count[key] == 2) out.push_back({ViolationKind::kDuplicate, Describe(p) + " appears more than once"});
      where.emplace(key, &p);
    }
  }
  std::vector<PassKind> required = {PassKind::kForward, PassKind::kBackward};
  if (sched.split_backward) required.push_back(PassKind::kWeight);
  for (int s = 0; s < n; ++s)
    for (int mb = 0; mb < sched.m; ++mb)
      for (PassKind k : required)
        if (!where.count(PassKey{k, s, mb}))
          out.push_back({ViolationKind::kMissing, Describe(k, s, mb) + " is missing"});

  for (const auto& [key, p] : where) {
    auto pred = Predecessor(key, n);
    if (!pred) continue;
    auto it = where.find(*pred);
    if (it == where.end()) continue;
    const Pass* q = it->second;
    Time ready = q->end();
    if (key.kind != PassKind::kWeight && sched.placement[q->stage] != sched.placement[p->stage])
      ready += costs.comm;
    if (p->start < ready) {
      std::ostringstream os;
      os << Describe(*p) << " starts at " << p->start << " before " << Describe(*q)
         << " is available at " << ready;
      out.push_back({ViolationKind::kDependency, os.str()});
    }
  }

  for (int dev = 0; dev < static_cast<int>(sched.device_passes.size()); ++dev) {
    const auto& list = sched.device_passes[dev];
    std::vector<const Pass*> by_time;
    for (const Pass& p : list) by_time.push_back(&p);
    std::stable_sort(by_time.begin(), by_time.end(),
                     [](const Pass* a, const Pass* b) { return a->start < b->start; });
    for (std::size_t i = 1; i < by_time.size(); ++i) {
      if (by_time[i]->start < by_time[i - 1]->end()) {
        out.push_back({ViolationKind::kOverlap, Describe(*by_time[i - 1]) + " and " + Describe(*by_time[i]) +
                                                    " overlap on device " + std::to_string(dev)});
      }
    }
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i].start < list[i - 1].start) {
        out.push_back({ViolationKind::kOverlap, Describe(list[i]) + " is listed after " + Describe(list[i - 1]) +
                                                    " but starts earlier on device " + std::to_string(dev)});
      }
    }
  }
  // Map iteration above is unordered; sort for stable reports.
  std::stable_sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
    return std::tie(a.kind, a.message) < std::tie(b.kind, b.message);
  });
  return out;
}

void RetimeAsap(Schedule& sched, const Time& comm, const std::function<Time(const Pass&)>& release) {
  int n = sched.num_stages();
  int ndev = static_cast<int>(sched.device_passes.size());
  std::unordered_map<PassKey, Time, PassKeyHash> end;
  end.reserve(sched.num_passes());
  std::vector<std::size_t> pos(ndev, 0);
  std::vector<Time> free(ndev, Time(0));
  std::size_t placed = 0, total = sched.num_passes();
  while (placed < total) {
    bool progress = false;
    for (int dev = 0; dev < ndev; ++dev) {
      auto& list = sched.device_passes[dev];
      while (pos[dev] < list.size()) {
        Pass& p = list[pos[dev]];
        PassKey key{p.kind, p.stage, p.microbatch};
        Time t = free[dev];
        if (auto pred = Predecessor(key, n)) {
          auto it = end.find(*pred);
          if (it == end.end()) break;
          Time ready = it->second;
          if (p.kind != PassKind::kWeight && sched.placement[pred->stage] != sched.placement[p.stage])
            ready += comm;
          t = max(t, ready);
        }
        if (release) t = max(t, release(p));
        p.start = t;
        free[dev] = p.end();
        end[key] = p.end();
        ++pos[dev];
        ++placed;
        progress = true;
      }
    }
    if (!progress) {
      std::ostringstream os;
      os << "pass order cannot be satisfied; blocked heads:";
      for (int dev = 0; dev < ndev; ++dev)
        if (pos[dev] < sched.device_passes[dev].size())
          os << " device " << dev << ' ' << Describe(sched.device_passes[dev][pos[dev]]);
      throw Error(ErrorCode::kDeadlock, os.str());
    }
  }
}

std::int64_t DeviceMemory::Peak() const { return PeakPoint().count; }

const MemoryPoint& DeviceMemory::PeakPoint() const {
  const MemoryPoint* best = &points.front();
  for (const MemoryPoint& p : points)
    if (p.count > best->count) best = &p;
  return *best;
}

std::int64_t DeviceMemory::PeakExcluding(const std::vector<int>& local_stages) const {
  std::int64_t best = 0;
  for (const MemoryPoint& p : points) {
    std::int64_t c = p.count;
    for (int ls : local_stages) c -= p.per_stage.at(ls);
    best = std::max(best, c);
  }
  return best;
}

Time DeviceMemory::Area() const {
  Time area = 0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    area += Time(points[i].count) * (points[i + 1].time - points[i].time);
  return area;
}

int MemoryTimeline::PeakDevice() const {
  int best = 0;
  for (int i = 1; i < static_cast<int>(devices.size()); ++i)
    if (devices[i].Peak() > devices[best].Peak()) best = i;
  return best;
}

MemoryTimeline BuildTimeline(const Schedule& sched, const std::vector<Residency>& intervals,
                             std::int64_t bytes_per_unit) {
  MemoryTimeline tl;
  tl.bytes_per_unit = bytes_per_unit;
  tl.devices.resize(sched.d);
  std::vector<int> local(sched.num_stages());
  for (int dev = 0; dev < sched.d; ++dev) {
    tl.devices[dev].stages = sched.DeviceStages(dev);
    for (std::size_t i = 0; i < tl.devices[dev].stages.size(); ++i) local[tl.devices[dev].stages[i]] = static_cast<int>(i);
  }
  struct Event {
    Time time;
    int delta;
    int local;
  };
  std::vector<std::vector<Event>> events(sched.d);
  for (const Residency& r : intervals) {
    if (!(r.begin < r.end)) continue;
    events.at(r.device).push_back({r.begin, r.weight, local[r.stage]});
    events.at(r.device).push_back({r.end, -r.weight, local[r.stage]});
  }
  for (int dev = 0; dev < sched.d; ++dev) {
    auto& ev = events[dev];
    auto& dm = tl.devices[dev];
    std::size_t nloc = dm.stages.size();
    std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
      if (a.time != b.time) return a.time < b.time;
      return a.delta < b.delta;
    });
    MemoryPoint cur;
    cur.per_stage.assign(nloc, 0);
    if (ev.empty()) {
      dm.points.push_back(cur);
      continue;
    }
    for (std::size_t i = 0; i < ev.size();) {
      Time t = ev[i].time;
      for (; i < ev.size() && ev[i].time == t; ++i) {
        cur.count += ev[i].delta;
        cur.per_stage[ev[i].local] += ev[i].delta;
      }
      cur.time = t;
      dm.points.push_back(cur);
    }
  }
  return tl;
}

MemoryTimeline BuildMemoryTimeline(const Schedule& sched, const ModelSpec& model, bool recompute,
                                   std::int64_t overhead_bytes) {
  PassIndex index(sched);
  std::vector<Residency> intervals;
  for (const auto& dp : sched.device_passes) {
    for (const Pass& f : dp) {
      if (f.kind != PassKind::kForward) continue;
      const Pass* b = index.Find(PassKind::kBackward, f.stage, f.microbatch);
      if (b == nullptr) continue;
      intervals.push_back({f.device, f.stage, sched.stage_weight.at(f.stage), f.start, b->end()});
    }
  }
  MemoryTimeline tl =
      BuildTimeline(sched, intervals, ActivationBytesPerLayer(model, recompute) * model.layers_per_stage);
  tl.overhead_bytes = overhead_bytes;
  return tl;
}

std::vector<std::int64_t> StageContributionAtPeak(const MemoryTimeline& tl, int device) {
  return tl.devices.at(device).PeakPoint().per_stage;
}

void WriteSchedule(std::ostream& os, const Schedule& sched) {
  os << "# ppoff schedule\n";
  if (!sched.name.empty()) os << "# name " << sched.name << '\n';
  os << "# d " << sched.d << " v " << sched.v << " m " << sched.m << '\n';
  os << "# split " << (sched.split_backward ? 1 : 0) << '\n';
  os << "# composition "
     << (sched.composition == Composition::kInterleaving ? "interleaving" : "uniform-repeat") << " group "
     << sched.group << " interval " << sched.interval << '\n';
  os << "# placement";
  for (int p : sched.placement) os << ' ' << p;
  os << "\n# weight";
  for (int w : sched.stage_weight) os << ' ' << w;
  os << '\n';
  for (const auto& dp : sched.device_passes)
    for (const Pass& p : dp)
      os << p.device << ' ' << p.stage << ' ' << p.microbatch << ' ' << PassKindName(p.kind) << ' '
         << p.start << ' ' << p.duration << '\n';
}

std::string ScheduleToString(const Schedule& sched) {
  std::ostringstream os;
  WriteSchedule(os, sched);
  return os.str();
}

namespace {

[[noreturn]] void ParseFail(int line, const std::string& what) {
  throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

Schedule ParseSchedule(std::istream& is) {
  Schedule sched;
  sched.d = 0;
  sched.v = 0;
  sched.m = -1;
  bool have_split = false;
  std::vector<Pass> passes;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    std::istringstream ls(line.substr(first));
    if (line[first] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "name") {
        ls >> sched.name;
      } else if (key == "d") {
        std::string kv, kmb;
        if (!(ls >> sched.d >> kv >> sched.v >> kmb >> sched.m) || kv != "v" || kmb != "m")
          ParseFail(lineno, "bad shape header");
      } else if (key == "split") {
        int s = 0;
        if (!(ls >> s)) ParseFail(lineno, "bad split header");
        sched.split_backward = s != 0;
        have_split = true;
      } else if (key == "composition") {
        std::string kind, kg, ki, interval;
        if (!(ls >> kind >> kg >> sched.group >> ki >> interval) || kg != "group" || ki != "interval")
          ParseFail(lineno, "bad composition header");
        if (kind == "interleaving")
          sched.composition = Composition::kInterleaving;
        else if (kind == "uniform-repeat")
          sched.composition = Composition::kUniformRepeat;
        else
          ParseFail(lineno, "unknown composition '" + kind + "'");
        try {
          sched.interval = Rational::parse(interval);
        } catch (const std::exception& e) {
          ParseFail(lineno, e.what());
        }
      } else if (key == "placement" || key == "weight") {
        auto& dst = key == "placement" ? sched.placement : sched.stage_weight;
        int x;
        while (ls >> x) dst.push_back(x);
      }
      continue;
    }
    Pass p;
    std::string kind, start, dur, extra;
    if (!(ls >> p.device >> p.stage >> p.microbatch >> kind >> start >> dur))
      ParseFail(lineno, "expected 'device stage microbatch kind start duration'");
    if (ls >> extra) ParseFail(lineno, "trailing field '" + extra + "'");
    auto k = ParsePassKind(kind);
    if (!k) ParseFail(lineno, "unknown pass kind '" + kind + "'");
    if (*k == PassKind::kOffload || *k == PassKind::kReload) continue;  // plan lines
    p.kind = *k;
    try {
      p.start = Rational::parse(start);
      p.duration = Rational::parse(dur);
    } catch (const std::exception& e) {
      ParseFail(lineno, e.what());
    }
    if (p.device < 0 || p.stage < 0 || p.microbatch < 0) ParseFail(lineno, "negative index");
    passes.push_back(p);
  }
  // Fill whatever the header did not state from the passes themselves.
  int max_dev = -1, max_stage = -1, max_mb = -1;
  for (const Pass& p : passes) {
    max_dev = std::max(max_dev, p.device);
    max_stage = std::max(max_stage, p.stage);
    max_mb = std::max(max_mb, p.microbatch);
  }
  if (sched.d <= 0) sched.d = std::max(1, max_dev + 1);
  if (sched.m < 0) sched.m = max_mb + 1;
  if (sched.placement.empty()) {
    sched.placement.assign(max_stage + 1, 0);
    for (const Pass& p : passes) sched.placement[p.stage] = p.device;
  }
  if (sched.v <= 0) sched.v = std::max(1, sched.num_stages() / sched.d);
  if (sched.stage_weight.empty()) sched.stage_weight.assign(sched.num_stages(), 1);
  if (static_cast<int>(sched.stage_weight.size()) != sched.num_stages())
    throw Error(ErrorCode::kParse, "weight header does not match placement");
  if (!have_split)
    sched.split_backward = std::any_of(passes.begin(), passes.end(),
                                       [](const Pass& p) { return p.kind == PassKind::kWeight; });
  sched.device_passes.assign(sched.d, {});
  for (const Pass& p : passes) {
    if (p.device >= sched.d) throw Error(ErrorCode::kParse, "device index beyond header d");
    sched.device_passes[p.device].push_back(p);
  }
  return sched;
}

Schedule ParseScheduleString(const std::string& text) {
  std::istringstream is(text);
  return ParseSchedule(is);
}

}  // namespace ppoff
