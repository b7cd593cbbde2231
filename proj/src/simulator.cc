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

#include "ppoff/simulator.h"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>

#include "engine.h"
#include "json.hpp"
#include "ppoff/error.h"

namespace ppoff {

namespace {

std::string Label(const Pass& p) {
  return std::string(PassKindName(p.kind)) + "(dev " + std::to_string(p.device) + ", stage " +
         std::to_string(p.stage) + ", mb " + std::to_string(p.microbatch) + ")";
}

std::string Label(const Transfer& t) {
  return std::string(t.dir == Direction::kD2H ? "OFFLOAD" : "RELOAD") + "(dev " + std::to_string(t.device) +
         ", stage " + std::to_string(t.stage) + ", mb " + std::to_string(t.microbatch) + ")";
}

engine::RateFn MakeRates(const std::vector<engine::Task>& tasks, ContentionMode mode, int devices_per_switch) {
  if (mode == ContentionMode::kNone) return nullptr;
  int per_switch = std::max(1, devices_per_switch);
  return [&tasks, per_switch](const std::vector<int>& active) {
    std::map<int, int> on_device;
    std::map<std::pair<int, int>, std::set<int>> same_dir;  // (switch, dir) -> devices
    for (int t : active) {
      on_device[tasks[t].device]++;
      same_dir[{tasks[t].device / per_switch, tasks[t].direction}].insert(tasks[t].device);
    }
    std::vector<Rational> rates;
    for (int t : active) {
      std::int64_t share = on_device[tasks[t].device] *
                           static_cast<std::int64_t>(same_dir[{tasks[t].device / per_switch, tasks[t].direction}].size());
      rates.emplace_back(1, share);
    }
    return rates;
  };
}

}  // namespace

SimTrace Simulate(const Schedule& sched, const OffloadPlan* plan, const PassCosts& costs, const HardwareSpec& hw,
                  const SimOptions& options) {
  costs.Validate();
  int d = sched.d;
  if (static_cast<int>(sched.device_passes.size()) != d)
    throw Error(ErrorCode::kInvalidConfig, "schedule device count mismatch");
  if (plan != nullptr && plan->d != 0 && plan->d != d)
    throw Error(ErrorCode::kInvalidConfig, "plan device count does not match the schedule");
  bool dual = options.streams == StreamMode::kDual;
  bool have_plan = plan != nullptr && plan->d == d;

  std::vector<engine::Task> tasks;
  std::vector<engine::Resource> resources(static_cast<std::size_t>(d) * (dual ? 3 : 2));
  for (int dev = 0; dev < d; ++dev) resources[dev].in_order = true;
  for (std::size_t r = d; r < resources.size(); ++r) resources[r].in_order = false;
  auto stream_of = [&](int dev, Direction dir) {
    if (!dual) return d + dev;
    return d + 2 * dev + (dir == Direction::kH2D ? 1 : 0);
  };

  std::unordered_map<PassKey, int, PassKeyHash> pass_task;
  std::vector<std::vector<int>> device_tasks(d);
  for (int dev = 0; dev < d; ++dev) {
    for (const Pass& p : sched.device_passes[dev]) {
      engine::Task t;
      t.resource = dev;
      t.work = p.duration;
      t.device = dev;
      t.label = Label(p);
      int id = static_cast<int>(tasks.size());
      pass_task[PassKey{p.kind, p.stage, p.microbatch}] = id;
      device_tasks[dev].push_back(id);
      resources[dev].order.push_back(id);
      tasks.push_back(std::move(t));
    }
  }
  int n = sched.num_stages();
  for (int dev = 0; dev < d; ++dev) {
    for (const Pass& p : sched.device_passes[dev]) {
      engine::Task& t = tasks[pass_task.at(PassKey{p.kind, p.stage, p.microbatch})];
      std::optional<PassKey> pred;
      if (p.kind == PassKind::kForward && p.stage > 0) pred = PassKey{PassKind::kForward, p.stage - 1, p.microbatch};
      if (p.kind == PassKind::kBackward)
        pred = p.stage == n - 1 ? PassKey{PassKind::kForward, p.stage, p.microbatch}
                                : PassKey{PassKind::kBackward, p.stage + 1, p.microbatch};
      if (p.kind == PassKind::kWeight) pred = PassKey{PassKind::kBackward, p.stage, p.microbatch};
      if (!pred) continue;
      auto it = pass_task.find(*pred);
      if (it == pass_task.end()) continue;
      Time lag = 0;
      if (p.kind != PassKind::kWeight && sched.placement[pred->stage] != sched.placement[p.stage]) lag = costs.comm;
      t.deps.push_back({it->second, true, lag});
    }
  }

  // Transfers.
  struct PlannedTransfer {
    const Transfer* t;
    int task;
  };
  std::vector<PlannedTransfer> planned;
  std::map<std::pair<int, std::size_t>, int> transfer_task;  // (device, index) -> task
  std::map<StageMicrobatch, std::pair<int, int>> pair_tasks;  // -> (d2h task, h2d task)
  if (have_plan) {
    std::map<StageMicrobatch, const Transfer*> d2h, h2d;
    std::set<StageMicrobatch> infeasible(plan->infeasible.begin(), plan->infeasible.end());
    for (const auto& s : plan->streams)
      for (const Transfer& t : s.transfers)
        (t.dir == Direction::kD2H ? d2h : h2d)[StageMicrobatch{t.stage, t.microbatch}] = &t;
    for (int dev = 0; dev < d; ++dev) {
      const auto& list = sched.device_passes[dev];
      std::unordered_map<PassKey, int, PassKeyHash> pos;
      for (std::size_t i = 0; i < list.size(); ++i) pos[PassKey{list[i].kind, list[i].stage, list[i].microbatch}] = static_cast<int>(i);
      const auto& transfers = plan->streams[dev].transfers;
      for (std::size_t i = 0; i < transfers.size(); ++i) {
        const Transfer& tr = transfers[i];
        StageMicrobatch key{tr.stage, tr.microbatch};
        if (!d2h.count(key) || !h2d.count(key)) continue;  // unmatched halves are ignored
        auto f = pos.find(PassKey{PassKind::kForward, tr.stage, tr.microbatch});
        auto b = pos.find(PassKey{PassKind::kBackward, tr.stage, tr.microbatch});
        if (f == pos.end() || b == pos.end())
          throw Error(ErrorCode::kInvalidConfig, "plan refers to a pass not on device " + std::to_string(dev));
        engine::Task t;
        t.resource = stream_of(dev, tr.dir);
        t.work = tr.duration;
        t.transfer = true;
        t.device = dev;
        t.direction = tr.dir == Direction::kD2H ? 0 : 1;
        t.priority = tr.start;
        t.label = Label(tr);
        // Anchor: the last pass planned to start by the slot, never at or
        // after the B that consumes this activation. Both halves of an
        // infeasible pair have no usable slot shape, so they only wait for
        // their data and the stream.
        bool forced = infeasible.count(key) != 0;
        int anchor = -1;
        for (int k = 0; k < static_cast<int>(list.size()) && k < b->second; ++k)
          if (list[k].start <= tr.start) anchor = k;
        if (forced) {
        } else if (anchor >= 0) {
          t.deps.push_back({device_tasks[dev][anchor], false, tr.start - list[anchor].start});
        } else {
          t.release = tr.start;
        }
        if (tr.dir == Direction::kD2H) t.deps.push_back({device_tasks[dev][f->second], true, 0});
        int id = static_cast<int>(tasks.size());
        tasks.push_back(std::move(t));
        resources[tasks[id].resource].members.push_back(id);
        transfer_task[{dev, i}] = id;
        planned.push_back({&tr, id});
        auto& pt = pair_tasks.try_emplace(key, -1, -1).first->second;
        (tr.dir == Direction::kD2H ? pt.first : pt.second) = id;
      }
    }
    for (const auto& [key, pt] : pair_tasks) {
      tasks[pt.second].deps.push_back({pt.first, true, 0});
      tasks[pass_task.at(PassKey{PassKind::kBackward, key.stage, key.microbatch})].deps.push_back({pt.second, true, 0});
    }
    if (plan->synchronized && options.use_sync_edges) {
      for (const SyncEdge& e : plan->sync_edges) {
        auto a = transfer_task.find({e.device, e.index});
        auto b = transfer_task.find({e.partner, e.partner_index});
        if (a != transfer_task.end() && b != transfer_task.end()) tasks[a->second].deps.push_back({b->second, true, 0});
      }
    }
  }

  engine::Result res = engine::Run(tasks, resources, MakeRates(tasks, options.contention, hw.devices_per_switch));

  SimTrace trace;
  trace.timed = sched;
  for (auto& list : trace.timed.device_passes)
    for (Pass& p : list) p.start = res.start[pass_task.at(PassKey{p.kind, p.stage, p.microbatch})];
  trace.device_end.assign(d, Time(0));
  trace.busy.assign(d, Time(0));
  for (int dev = 0; dev < d; ++dev) {
    for (const Pass& p : trace.timed.device_passes[dev]) {
      trace.device_end[dev] = max(trace.device_end[dev], p.end());
      trace.busy[dev] += p.duration;
    }
    trace.makespan = max(trace.makespan, trace.device_end[dev]);
  }
  for (const PlannedTransfer& pt : planned)
    trace.transfers.push_back({pt.t->dir, pt.t->device, pt.t->stage, pt.t->microbatch, pt.t->start,
                               res.start[pt.task], res.end[pt.task]});
  for (const auto& ev : res.rate_changes)
    trace.contention_events.push_back(
        {ev.time, tasks[ev.task].device, tasks[ev.task].direction == 0 ? Direction::kD2H : Direction::kH2D, ev.rate});

  std::int64_t unit = ActivationBytesPerLayer(options.model, true) * options.model.layers_per_stage;
  std::vector<Residency> resident;
  PassIndex index(trace.timed);
  for (const auto& list : trace.timed.device_passes) {
    for (const Pass& f : list) {
      if (f.kind != PassKind::kForward) continue;
      const Pass* b = index.Find(PassKind::kBackward, f.stage, f.microbatch);
      if (b == nullptr) continue;
      int w = sched.stage_weight.at(f.stage);
      auto it = pair_tasks.find(StageMicrobatch{f.stage, f.microbatch});
      if (it == pair_tasks.end()) {
        resident.push_back({f.device, f.stage, w, f.start, b->end()});
        continue;
      }
      Time d2h_end = res.end[it->second.first];
      Time h2d_start = res.start[it->second.second];
      Time h2d_end = res.end[it->second.second];
      resident.push_back({f.device, f.stage, w, f.start, d2h_end});
      resident.push_back({f.device, f.stage, w, h2d_start, b->end()});
      trace.host.push_back({f.device, w * unit, d2h_end, h2d_end});
    }
  }
  trace.device_memory = BuildTimeline(sched, resident, unit);
  return trace;
}

std::vector<Time> BubbleTime(const SimTrace& trace) {
  std::vector<Time> out;
  for (const Time& busy : trace.busy) out.push_back(trace.makespan - busy);
  return out;
}

std::vector<double> BubbleRate(const SimTrace& trace) {
  std::vector<double> out;
  for (const Time& b : BubbleTime(trace))
    out.push_back(trace.makespan > 0 ? (b / trace.makespan).to_double() : 0.0);
  return out;
}

PeakReport PeakMemory(const SimTrace& trace) {
  PeakReport r;
  const MemoryTimeline& tl = trace.device_memory;
  for (int dev = 0; dev < static_cast<int>(tl.devices.size()); ++dev) {
    r.count.push_back(tl.PeakCount(dev));
    r.bytes.push_back(tl.PeakBytes(dev));
    if (r.count.back() > r.max_count) {
      r.max_count = r.count.back();
      r.max_bytes = r.bytes.back();
      r.max_device = dev;
    }
  }
  return r;
}

std::vector<std::int64_t> HostPeakMemory(const SimTrace& trace, const NodeAssignment& assignment) {
  std::vector<std::vector<std::pair<Time, std::int64_t>>> events(assignment.num_nodes);
  for (const HostResidency& h : trace.host) {
    if (!(h.begin < h.end)) continue;
    int node = assignment.node_of_rank.at(h.device);
    events[node].push_back({h.begin, h.bytes});
    events[node].push_back({h.end, -h.bytes});
  }
  std::vector<std::int64_t> peak(assignment.num_nodes, 0);
  for (int node = 0; node < assignment.num_nodes; ++node) {
    auto& ev = events[node];
    std::sort(ev.begin(), ev.end());  // releases sort before allocations at one instant
    std::int64_t cur = 0;
    for (const auto& [t, delta] : ev) {
      cur += delta;
      peak[node] = std::max(peak[node], cur);
    }
  }
  return peak;
}

namespace {

template <typename Rec>
Time OverlapOf(const std::vector<Rec>& recs, int devices_per_switch) {
  Time total = 0;
  if (devices_per_switch < 2) return total;
  for (std::size_t i = 0; i < recs.size(); ++i)
    for (std::size_t j = i + 1; j < recs.size(); ++j) {
      const Rec& a = recs[i];
      const Rec& b = recs[j];
      if (a.device == b.device || a.dir != b.dir || a.device / devices_per_switch != b.device / devices_per_switch)
        continue;
      Time lo = max(a.start, b.start), hi = min(a.end, b.end);
      if (lo < hi) total += hi - lo;
    }
  return total;
}

}  // namespace

Time SameDirectionOverlap(const SimTrace& trace, int devices_per_switch) {
  return OverlapOf(trace.transfers, devices_per_switch);
}

const char* SwitchDisciplineName(SwitchDiscipline d) {
  switch (d) {
    case SwitchDiscipline::kParallel:
      return "parallel";
    case SwitchDiscipline::kInterleaved:
      return "interleaved";
    case SwitchDiscipline::kSyncInterleaved:
      return "sync-interleaved";
    case SwitchDiscipline::kDualStream:
      return "dual-stream";
  }
  return "?";
}

SwitchScenario SwitchScenario::Default() {
  SwitchScenario s;
  s.delays.assign(2, {});
  for (int r = 0; r < s.rounds; ++r) {
    s.delays[0].push_back(Time(2) + Time(r % 3, 4));
    s.delays[1].push_back(Time(2) + Time((r + 1) % 3, 4));
  }
  return s;
}

SwitchResult SimulateSwitchScenario(const SwitchScenario& sc, SwitchDiscipline discipline,
                                    ContentionMode contention) {
  constexpr int kDevices = 2;
  if (static_cast<int>(sc.delays.size()) != kDevices)
    throw Error(ErrorCode::kInvalidConfig, "switch scenario needs delays for two devices");
  for (const auto& dl : sc.delays)
    if (static_cast<int>(dl.size()) < sc.rounds) throw Error(ErrorCode::kInvalidConfig, "too few delays");
  bool dual = discipline == SwitchDiscipline::kDualStream;
  // resources: compute 0,1; streams 2,3 (or D2H 2,4 and H2D 3,5 when dual)
  std::vector<engine::Resource> resources(dual ? 6 : 4);
  std::vector<engine::Task> tasks;
  std::vector<std::vector<int>> stream_seq(kDevices);  // per device, transfers in issue order
  std::vector<int> last_round_end(kDevices, -1);
  std::vector<std::vector<int>> round_transfers(kDevices);
  for (int r = 0; r < sc.rounds; ++r) {
    for (int dev = 0; dev < kDevices; ++dev) {
      engine::Task c;
      c.resource = dev;
      c.work = sc.delays[dev][r];
      c.device = dev;
      c.label = "compute(dev " + std::to_string(dev) + ", round " + std::to_string(r) + ")";
      for (int t : round_transfers[dev]) c.deps.push_back({t, true, 0});
      int cid = static_cast<int>(tasks.size());
      tasks.push_back(c);
      resources[dev].order.push_back(cid);
      round_transfers[dev].clear();
      bool reload_first = dev == 1 && (discipline == SwitchDiscipline::kInterleaved ||
                                       discipline == SwitchDiscipline::kSyncInterleaved);
      for (int k = 0; k < 2; ++k) {
        int dir = (k == 0) != reload_first ? 0 : 1;
        engine::Task t;
        t.transfer = true;
        t.work = sc.transfer;
        t.device = dev;
        t.direction = dir;
        t.priority = Time(2 * r + k);
        t.label = std::string(dir == 0 ? "offload" : "reload") + "(dev " + std::to_string(dev) + ", round " +
                  std::to_string(r) + ")";
        t.deps.push_back({cid, true, 0});
        t.resource = dual ? 2 + 2 * dev + dir : 2 + dev;
        int id = static_cast<int>(tasks.size());
        tasks.push_back(t);
        if (!dual) {
          if (!stream_seq[dev].empty()) tasks[id].deps.push_back({stream_seq[dev].back(), true, 0});
        }
        resources[tasks[id].resource].in_order = false;
        resources[tasks[id].resource].members.push_back(id);
        stream_seq[dev].push_back(id);
        round_transfers[dev].push_back(id);
      }
    }
  }
  if (discipline == SwitchDiscipline::kSyncInterleaved) {
    for (int dev = 0; dev < kDevices; ++dev)
      for (std::size_t k = 1; k < stream_seq[dev].size(); ++k)
        tasks[stream_seq[dev][k]].deps.push_back({stream_seq[1 - dev][k - 1], true, 0});
  }
  engine::Result res = engine::Run(tasks, resources, MakeRates(tasks, contention, kDevices));
  SwitchResult out;
  struct Rec {
    int device;
    int dir;
    Time start, end;
  };
  std::vector<Rec> recs;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    out.makespan = max(out.makespan, res.end[t]);
    if (tasks[t].transfer) recs.push_back({tasks[t].device, tasks[t].direction, res.start[t], res.end[t]});
  }
  out.same_direction_overlap = OverlapOf(recs, kDevices);
  return out;
}

void WriteTraceCsv(std::ostream& os, const SimTrace& trace) {
  os << "kind,device,stage,microbatch,start,end,start_s,end_s\n";
  auto row = [&](const char* kind, int dev, int stage, int mb, const Time& s, const Time& e) {
    os << kind << ',' << dev << ',' << stage << ',' << mb << ',' << s << ',' << e << ',' << s.to_double() << ','
       << e.to_double() << '\n';
  };
  for (const auto& list : trace.timed.device_passes)
    for (const Pass& p : list) row(PassKindName(p.kind), p.device, p.stage, p.microbatch, p.start, p.end());
  for (const TransferRecord& t : trace.transfers)
    row(t.dir == Direction::kD2H ? "OFFLOAD" : "RELOAD", t.device, t.stage, t.microbatch, t.start, t.end);
}

std::string TraceSummaryJson(const SimTrace& trace) {
  nlohmann::json j;
  j["schedule"] = trace.timed.name;
  j["d"] = trace.timed.d;
  j["v"] = trace.timed.v;
  j["m"] = trace.timed.m;
  j["makespan"] = trace.makespan.to_string();
  j["makespan_s"] = trace.makespan.to_double();
  auto bubbles = BubbleTime(trace);
  auto rates = BubbleRate(trace);
  PeakReport peaks = PeakMemory(trace);
  j["devices"] = nlohmann::json::array();
  for (std::size_t dev = 0; dev < bubbles.size(); ++dev) {
    j["devices"].push_back({{"device", dev},
                            {"bubble", bubbles[dev].to_string()},
                            {"bubble_s", bubbles[dev].to_double()},
                            {"bubble_rate", rates[dev]},
                            {"peak_count", peaks.count[dev]},
                            {"peak_bytes", peaks.bytes[dev]}});
  }
  j["peak_count"] = peaks.max_count;
  j["peak_bytes"] = peaks.max_bytes;
  j["peak_device"] = peaks.max_device;
  j["transfers"] = trace.transfers.size();
  j["contention_events"] = trace.contention_events.size();
  return j.dump(2);
}

}  // namespace ppoff
