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

#include "engine.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "ppoff/error.h"

namespace ppoff::engine {

namespace {

struct Dependent {
  int task;
  Time lag;
};

class Runner {
 public:
  Runner(const std::vector<Task>& tasks, const std::vector<Resource>& resources, const RateFn& rates)
      : tasks_(tasks), resources_(resources), rates_(rates) {
    std::size_t n = tasks.size();
    unresolved_.assign(n, 0);
    ready_at_.assign(n, Time(0));
    started_.assign(n, false);
    finished_.assign(n, false);
    remaining_.assign(n, Time(0));
    rate_.assign(n, Rational(1));
    on_start_.resize(n);
    on_end_.resize(n);
    result_.start.assign(n, Time(0));
    result_.end.assign(n, Time(0));
    for (std::size_t t = 0; t < n; ++t) {
      const Task& task = tasks[t];
      if (task.release) ready_at_[t] = *task.release;
      remaining_[t] = task.work;
      unresolved_[t] = static_cast<int>(task.deps.size());
      for (const Dep& d : task.deps) (d.on_end ? on_end_ : on_start_).at(d.task).push_back({static_cast<int>(t), d.lag});
    }
    busy_.assign(resources.size(), -1);
    pos_.assign(resources.size(), 0);
    pending_.resize(resources.size());
    for (std::size_t t = 0; t < n; ++t)
      if (unresolved_[t] == 0 && !resources_[tasks_[t].resource].in_order) Enqueue(static_cast<int>(t));
  }

  Result Run() {
    std::size_t n = tasks_.size();
    Time now = 0;
    while (done_ < n) {
      Dispatch(now);
      if (done_ == n) break;
      UpdateRates(now);
      std::optional<Time> next;
      auto consider = [&](const Time& t) {
        if (!next || t < *next) next = t;
      };
      for (std::size_t r = 0; r < resources_.size(); ++r) {
        int t = busy_[r];
        if (t >= 0) {
          consider(now + remaining_[t] / rate_[t]);
        } else if (auto c = NextReady(static_cast<int>(r), now)) {
          consider(*c);
        }
      }
      if (!next) ReportDeadlock();
      Time dt = *next - now;
      for (std::size_t r = 0; r < resources_.size(); ++r) {
        int t = busy_[r];
        if (t >= 0) remaining_[t] -= rate_[t] * dt;
      }
      now = *next;
      for (std::size_t r = 0; r < resources_.size(); ++r) {
        int t = busy_[r];
        if (t >= 0 && remaining_[t] <= 0) Finish(t, now);
      }
    }
    return std::move(result_);
  }

 private:
  void Enqueue(int t) { pending_[tasks_[t].resource].insert({tasks_[t].priority, t}); }

  void Resolve(const Dependent& dep, const Time& when) {
    ready_at_[dep.task] = max(ready_at_[dep.task], when + dep.lag);
    if (--unresolved_[dep.task] == 0 && !resources_[tasks_[dep.task].resource].in_order) Enqueue(dep.task);
  }

  void Start(int t, const Time& now) {
    started_[t] = true;
    result_.start[t] = now;
    int r = tasks_[t].resource;
    busy_[r] = t;
    if (resources_[r].in_order)
      ++pos_[r];
    else
      pending_[r].erase({tasks_[t].priority, t});
    rates_dirty_ = true;
    for (const Dependent& d : on_start_[t]) Resolve(d, now);
    if (remaining_[t] <= 0) Finish(t, now);
  }

  void Finish(int t, const Time& now) {
    finished_[t] = true;
    result_.end[t] = now;
    busy_[tasks_[t].resource] = -1;
    ++done_;
    rates_dirty_ = true;
    for (const Dependent& d : on_end_[t]) Resolve(d, now);
  }

  // A task on idle resource r that may start at `now`, if any.
  std::optional<int> Pick(int r, const Time& now) {
    const Resource& res = resources_[r];
    if (res.in_order) {
      if (pos_[r] >= res.order.size()) return std::nullopt;
      int t = res.order[pos_[r]];
      if (unresolved_[t] == 0 && ready_at_[t] <= now) return t;
      return std::nullopt;
    }
    for (const auto& [prio, t] : pending_[r])
      if (ready_at_[t] <= now) return t;
    return std::nullopt;
  }

  std::optional<Time> NextReady(int r, const Time& now) {
    const Resource& res = resources_[r];
    std::optional<Time> best;
    if (res.in_order) {
      if (pos_[r] < res.order.size()) {
        int t = res.order[pos_[r]];
        if (unresolved_[t] == 0 && ready_at_[t] > now) best = ready_at_[t];
      }
      return best;
    }
    for (const auto& [prio, t] : pending_[r])
      if (ready_at_[t] > now && (!best || ready_at_[t] < *best)) best = ready_at_[t];
    return best;
  }

  void Dispatch(const Time& now) {
    bool again = true;
    while (again) {
      again = false;
      for (std::size_t r = 0; r < resources_.size(); ++r) {
        if (busy_[r] >= 0) continue;
        if (auto t = Pick(static_cast<int>(r), now)) {
          Start(*t, now);
          again = true;
        }
      }
    }
  }

  void UpdateRates(const Time& now) {
    if (!rates_dirty_) return;
    rates_dirty_ = false;
    std::vector<int> active;
    for (int t : busy_)
      if (t >= 0 && tasks_[t].transfer) active.push_back(t);
    if (active.empty()) return;
    std::vector<Rational> r = rates_ ? rates_(active) : std::vector<Rational>(active.size(), Rational(1));
    for (std::size_t i = 0; i < active.size(); ++i) {
      int t = active[i];
      if (!(r[i] > 0)) throw Error(ErrorCode::kInvalidConfig, "transfer rate must be positive");
      if (r[i] != rate_[t] && r[i] < 1) result_.rate_changes.push_back({now, t, r[i]});
      rate_[t] = r[i];
    }
  }

  [[noreturn]] void ReportDeadlock() {
    std::size_t n = tasks_.size();
    // waits-for edges among unfinished tasks
    std::vector<std::vector<int>> waits(n);
    for (std::size_t t = 0; t < n; ++t) {
      if (finished_[t]) continue;
      for (const Dep& d : tasks_[t].deps)
        if (d.on_end ? !finished_[d.task] : !started_[d.task]) waits[t].push_back(d.task);
    }
    for (std::size_t r = 0; r < resources_.size(); ++r) {
      const auto& order = resources_[r].order;
      if (!resources_[r].in_order) continue;
      for (std::size_t k = std::max<std::size_t>(pos_[r], 1); k < order.size(); ++k)
        if (!finished_[order[k - 1]]) waits[order[k]].push_back(order[k - 1]);
    }
    std::vector<int> color(n, 0), parent(n, -1);
    std::vector<int> cycle;
    for (std::size_t root = 0; root < n && cycle.empty(); ++root) {
      if (finished_[root] || color[root]) continue;
      std::vector<std::pair<int, std::size_t>> stack{{static_cast<int>(root), 0}};
      color[root] = 1;
      while (!stack.empty() && cycle.empty()) {
        auto& [u, i] = stack.back();
        if (i < waits[u].size()) {
          int w = waits[u][i++];
          if (color[w] == 0) {
            color[w] = 1;
            parent[w] = u;
            stack.push_back({w, 0});
          } else if (color[w] == 1) {
            for (int x = u; x != w; x = parent[x]) cycle.push_back(x);
            cycle.push_back(w);
            std::reverse(cycle.begin(), cycle.end());
          }
        } else {
          color[u] = 2;
          stack.pop_back();
        }
      }
    }
    std::ostringstream os;
    os << "no task can proceed";
    if (!cycle.empty()) {
      os << "; cycle:";
      for (int t : cycle) os << ' ' << tasks_[t].label << " ->";
      os << ' ' << tasks_[cycle.front()].label;
    }
    throw Error(ErrorCode::kDeadlock, os.str());
  }

  const std::vector<Task>& tasks_;
  const std::vector<Resource>& resources_;
  const RateFn& rates_;
  std::vector<int> unresolved_;
  std::vector<Time> ready_at_;
  std::vector<bool> started_, finished_;
  std::vector<Time> remaining_;
  std::vector<Rational> rate_;
  std::vector<std::vector<Dependent>> on_start_, on_end_;
  std::vector<int> busy_;
  std::vector<std::size_t> pos_;
  std::vector<std::set<std::pair<Time, int>>> pending_;
  std::size_t done_ = 0;
  bool rates_dirty_ = true;
  Result result_;
};

}  // namespace

Result Run(const std::vector<Task>& tasks, const std::vector<Resource>& resources, const RateFn& rates) {
  for (const Task& t : tasks)
    if (t.resource < 0 || t.resource >= static_cast<int>(resources.size()))
      throw Error(ErrorCode::kInvalidConfig, "task on unknown resource");
  Runner runner(tasks, resources, rates);
  return runner.Run();
}

}  // namespace ppoff::engine
