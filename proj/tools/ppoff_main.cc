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

// ppoff: build, plan, simulate, sweep, verify and render pipeline schedules.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ppoff/analysis.h"
#include "ppoff/config.h"
#include "ppoff/error.h"
#include "ppoff/render.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ppoff;

namespace {

struct Flags {
  std::string config, schedule, offload, contention, costs, preset, k, out, name;
  int d = 0, v = 0, m = 0, g = 0;
  bool sync = false;
  std::map<std::string, CLI::Option*> opt;
};

void AddRunFlags(CLI::App* app, Flags& f) {
  f.opt["config"] = app->add_option("--config", f.config, "JSON config file; flags override it");
  f.opt["schedule"] = app->add_option("--schedule", f.schedule, "1f1b, 1f1b-i, gis, gis-g, gis-h, po, 1f1b-offload");
  f.opt["d"] = app->add_option("--d", f.d, "pipeline devices");
  f.opt["v"] = app->add_option("--v", f.v, "stages per device");
  f.opt["m"] = app->add_option("--m", f.m, "microbatches (default 4d)");
  f.opt["g"] = app->add_option("--g", f.g, "group size for gis-g");
  f.opt["offload"] = app->add_option("--offload", f.offload, "none, half, full or a stage count");
  f.opt["contention"] = app->add_option("--contention", f.contention, "none or switch");
  f.opt["costs"] = app->add_option("--costs", f.costs, "tF,tB,tW,comm");
  f.opt["preset"] = app->add_option("--preset", f.preset, "model preset: 5.8B 10.5B 18.1B 42.9B 66.6B 83.8B");
  f.opt["k"] = app->add_option("--k", f.k, "override the offload/compute ratio");
  f.opt["sync"] = app->add_flag("--sync", f.sync, "stagger transfers of devices sharing a switch");
  f.opt["out"] = app->add_option("--out", f.out, "output directory");
  f.opt["name"] = app->add_option("--name", f.name, "output file stem (default: schedule name)");
}

bool Given(const Flags& f, const std::string& key) { return f.opt.at(key)->count() > 0; }

RunConfig LoadConfig(const Flags& f) {
  RunConfig c = Given(f, "config") ? RunConfig::Load(f.config) : RunConfig{};
  if (Given(f, "preset")) {
    const ModelPreset* p = FindPreset(f.preset);
    if (!p) throw Error(ErrorCode::kInvalidConfig, "unknown preset '" + f.preset + "'");
    c.preset = p->name;
    c.total_layers = p->layers;
    c.model.hidden_size = p->hidden_size;
  }
  if (Given(f, "schedule")) {
    auto kind = ParseScheduleKind(f.schedule);
    if (!kind) throw Error(ErrorCode::kInvalidConfig, "unknown schedule '" + f.schedule + "'");
    c.kind = *kind;
  }
  if (Given(f, "d")) c.d = f.d;
  if (Given(f, "v")) c.v = f.v;
  if (Given(f, "m")) c.m = f.m;
  if (Given(f, "g")) c.g = f.g;
  if (Given(f, "offload")) c.offload = OffloadChoice::Parse(f.offload);
  if (Given(f, "contention")) c.contention = ParseContention(f.contention);
  if (Given(f, "costs")) c.costs = ParseCosts(f.costs);
  if (Given(f, "k")) c.k = Rational::parse(f.k);
  if (Given(f, "sync")) c.topology_sync = f.sync;
  if (Given(f, "out")) c.out_dir = f.out;
  c.Validate();
  for (const std::string& w : c.Warnings()) std::cerr << "warning: " << w << '\n';
  return c;
}

std::string Stem(const Flags& f, const RunConfig& c) {
  if (!f.name.empty()) return f.name;
  std::string s = ScheduleKindName(c.kind);
  if (c.offload.mode != OffloadChoice::Mode::kNone) s += "-offload-" + c.offload.ToString();
  return s;
}

// Written to a sibling temp file first so readers never see a partial file.
void WriteFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::kInvalidConfig, "cannot write '" + path.string() + "'");
    out << text;
  }
  fs::rename(tmp, path);
  std::cout << "wrote " << path.string() << '\n';
}

json ClosedFormPeak(const RunConfig& c) {
  std::int64_t d = c.d, v = c.v;
  switch (c.kind) {
    case ScheduleKind::kOneFOneB:
    case ScheduleKind::kGIS:
      return d * v;
    case ScheduleKind::kInterleaved1F1B:
      return d * v + d - 1;
    case ScheduleKind::kGISG:
      return c.g * (v - 1) + d;
    case ScheduleKind::kGISH:
      return (d + 1) / 2 * (v - 1) + d;
    case ScheduleKind::kPO:
      if (c.offload.mode == OffloadChoice::Mode::kHalf) return (Rational(v + 2, 8 * v) * Rational(d * v)).to_string();
      return nullptr;
    case ScheduleKind::kOneFOneBFullOffload:
      return nullptr;
  }
  return nullptr;
}

json TimeList(const std::vector<Time>& xs) {
  json j = json::array();
  for (const Time& x : xs) j.push_back(x.to_string());
  return j;
}

int CmdPlan(const Flags& f) {
  RunConfig c = LoadConfig(f);
  RunSpec spec = c.ToRunSpec();
  Schedule sched = BuildSchedule(spec.kind, spec.d, spec.v, spec.m, spec.g, spec.costs);
  RunResult r = Run(spec);
  RenderInput doc{sched, {}};
  if (r.plan)
    for (const auto& s : r.plan->streams) doc.transfers.insert(doc.transfers.end(), s.transfers.begin(), s.transfers.end());
  fs::path dir = c.out_dir;
  std::string stem = Stem(f, c);
  WriteFile(dir / (stem + ".schedule"), RenderInputToString(doc));
  if (r.plan) WriteFile(dir / (stem + ".plan"), PlanToString(*r.plan));

  MemoryTimeline tl = BuildMemoryTimeline(sched, spec.model);
  json j;
  j["config"] = c.ToJson();
  j["describe"] = spec.Describe();
  j["config_hash"] = ConfigHash(spec.Describe());
  j["k"] = c.K().to_string();
  j["k_value"] = c.K().to_double();
  j["round_trip"] = spec.round_trip.to_string();
  j["pass_costs"] = CostsToString(spec.costs);
  j["predicted_peak"] = ClosedFormPeak(c);
  json peaks = json::array();
  for (int dev = 0; dev < sched.d; ++dev) peaks.push_back(tl.PeakCount(dev));
  j["peak_without_offload"] = peaks;
  j["peak"] = r.peaks.max_count;
  j["peak_bytes"] = r.peaks.max_bytes;
  j["makespan"] = sched.Makespan().to_string();
  if (r.plan) {
    j["offloaded_stages"] = r.plan->offloaded_stages;
    j["skipped"] = r.plan->skipped.size();
    j["infeasible"] = r.plan->infeasible.size();
    if (!r.plan->notice.empty()) j["notice"] = r.plan->notice;
  }
  j["warnings"] = c.Warnings();
  WriteFile(dir / (stem + ".summary.json"), j.dump(2) + "\n");
  std::cout << "peak " << r.peaks.max_count << " makespan " << sched.Makespan() << '\n';
  return 0;
}

int CmdSimulate(const Flags& f) {
  RunConfig c = LoadConfig(f);
  RunSpec spec = c.ToRunSpec();
  RunResult r = Run(spec);
  fs::path dir = c.out_dir;
  std::string stem = Stem(f, c);
  std::ostringstream csv;
  WriteTraceCsv(csv, r.trace);
  WriteFile(dir / (stem + ".trace.csv"), csv.str());
  RenderInput doc{r.trace.timed, {}};
  for (const TransferRecord& t : r.trace.transfers)
    doc.transfers.push_back({t.dir, t.device, t.stage, t.microbatch, t.start, t.end - t.start, 0});
  WriteFile(dir / (stem + ".trace.schedule"), RenderInputToString(doc));
  json j = json::parse(TraceSummaryJson(r.trace));
  j["config"] = c.ToJson();
  j["describe"] = spec.Describe();
  j["config_hash"] = ConfigHash(spec.Describe());
  j["bubble_time"] = TimeList(r.bubbles);
  j["bubble_rate"] = BubbleRate(r.trace);
  if (r.plan) {
    j["skipped"] = r.plan->skipped.size();
    j["infeasible"] = r.plan->infeasible.size();
    j["same_direction_overlap"] = SameDirectionOverlap(r.trace, c.hardware.devices_per_switch).to_string();
  }
  WriteFile(dir / (stem + ".summary.json"), j.dump(2) + "\n");
  std::cout << "makespan " << r.trace.makespan << " peak " << r.peaks.max_count << " (device " << r.peaks.max_device
            << ")\n";
  return 0;
}

std::vector<int> IntList(const std::string& text) {
  std::vector<int> xs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      xs.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidConfig, "expected a comma-separated integer list, got '" + text + "'");
    }
  }
  return xs;
}

int CmdSweep(const Flags& f, const std::string& kind, const std::string& totals, const std::string& kinds) {
  RunConfig c = LoadConfig(f);
  SweepResult res;
  if (kind == "reduction") {
    if (c.kind != ScheduleKind::kPO) std::cerr << "note: reduction curves always use po\n";
    RunSpec spec = c.ToRunSpec();
    res = ReductionCurve(c.d, c.v, c.microbatches(), spec.costs, spec.round_trip, spec.model);
  } else if (kind == "scaling") {
    std::vector<std::string> names;
    std::stringstream ss(kinds);
    std::string item;
    while (std::getline(ss, item, ',')) names.push_back(item);
    res = ScalingStudy(IntList(totals), names, c.Costs(), c.K(), {2, 4, 8}, c.StageModel());
  } else {
    throw Error(ErrorCode::kInvalidConfig, "sweep kind must be reduction or scaling");
  }
  fs::path dir = c.out_dir;
  std::string stem = f.name.empty() ? res.name : f.name;
  WriteFile(dir / (stem + ".csv"), res.ToCsv());
  WriteFile(dir / (stem + ".json"), res.ToJson() + "\n");
  if (kind == "reduction") std::cout << "better than linear: " << (BetterThanLinear(res) ? "yes" : "no") << '\n';
  return 0;
}

int CmdVerify(const Flags& f, const std::string& ds, const std::string& vs, const std::string& inject) {
  PassCosts costs = Given(f, "costs") ? ParseCosts(f.costs) : PassCosts::Unit();
  ClosedFormOptions opt;
  if (Given(f, "k")) opt.k = Rational::parse(f.k);
  if (inject == "gis-warmup") {
    opt.builder.warmup_delta = 1;
  } else if (!inject.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "unknown mutation '" + inject + "'");
  }
  int failures = 0;
  std::string first;
  for (int d : IntList(ds))
    for (int v : IntList(vs)) {
      ClosedFormReport rep = VerifyClosedForms(d, v, costs, opt);
      for (const ClosedFormRow& row : rep.rows) {
        std::cout << (row.match ? "ok   " : (row.gating ? "FAIL " : "note ")) << "d=" << d << " v=" << v << " m="
                  << rep.m << ' ' << row.schedule << ' ' << row.metric << " expected " << row.formula << " = "
                  << row.expected << " simulated " << row.simulated << '\n';
        if (row.gating && !row.match && failures++ == 0)
          first = row.schedule + " " + row.metric + " at d=" + std::to_string(d) + " v=" + std::to_string(v);
      }
      for (ScheduleKind kind : {ScheduleKind::kOneFOneB, ScheduleKind::kGIS, ScheduleKind::kGISH, ScheduleKind::kPO}) {
        Schedule s = BuildSchedule(kind, d, v, rep.m, 0, costs, opt.builder);
        auto violations = Validate(s, costs);
        if (!violations.empty()) {
          std::cout << "FAIL d=" << d << " v=" << v << ' ' << ScheduleKindName(kind) << " validation: "
                    << violations.front().message << '\n';
          if (failures++ == 0) first = std::string(ScheduleKindName(kind)) + " validation";
        }
      }
    }
  if (failures > 0) {
    std::cerr << "verify failed: " << failures << " check(s); first failing row: " << first << '\n';
    return 1;
  }
  std::cout << "all exact checks pass\n";
  return 0;
}

int CmdRender(const std::string& input, const std::string& svg_out, bool memory, bool ascii) {
  std::ifstream in(input);
  if (!in) throw Error(ErrorCode::kParse, "cannot open '" + input + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  RenderInput doc;
  try {
    doc = ParseRenderInput(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), input + ": " + e.what());
  }
  RenderOptions opt;
  opt.memory_strip = memory;
  fs::path out = svg_out.empty() ? fs::path(input + ".svg") : fs::path(svg_out);
  WriteFile(out, RenderSvg(doc, opt));
  if (ascii) std::cout << RenderAscii(doc, opt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pipeline schedule builder, offload planner and simulator"};
  app.require_subcommand(1);

  Flags plan_f, sim_f, sweep_f, verify_f;
  CLI::App* plan = app.add_subcommand("plan", "build a schedule and its offload plan");
  AddRunFlags(plan, plan_f);
  CLI::App* sim = app.add_subcommand("simulate", "simulate a schedule with its offload plan");
  AddRunFlags(sim, sim_f);

  CLI::App* sweep = app.add_subcommand("sweep", "reduction curve or scaling study");
  AddRunFlags(sweep, sweep_f);
  std::string sweep_kind = "reduction", totals = "8,16,32,64", kinds = "1f1b,1f1b-i,gis,gis-h,po,po-h,po-f";
  sweep->add_option("--kind", sweep_kind, "reduction or scaling")->capture_default_str();
  sweep->add_option("--totals", totals, "total stage counts for scaling")->capture_default_str();
  sweep->add_option("--kinds", kinds, "schedules for scaling (po-h and po-f offload)")->capture_default_str();

  CLI::App* verify = app.add_subcommand("verify", "check closed-form memory and bubble rows");
  std::string ds = "2,4,8", vs = "1,2,4", inject;
  verify_f.opt["costs"] = verify->add_option("--costs", verify_f.costs, "tF,tB,tW,comm (default 1,1,1,0)");
  verify_f.opt["k"] = verify->add_option("--k", verify_f.k, "round trip over F+B+W (default 1/2)");
  verify->add_option("--ds", ds, "device counts")->capture_default_str();
  verify->add_option("--vs", vs, "stages per device")->capture_default_str();
  verify->add_option("--inject", inject, "deliberate builder mutation: gis-warmup");

  CLI::App* render = app.add_subcommand("render", "draw a pass-line file as SVG and ASCII");
  std::string input, svg_out;
  bool memory = false, no_ascii = false;
  render->add_option("input", input, "pass-line file")->required();
  render->add_option("--svg", svg_out, "SVG path (default: input + .svg)");
  render->add_flag("--memory", memory, "add a memory strip per device");
  render->add_flag("--no-ascii", no_ascii, "skip the terminal chart");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*plan) return CmdPlan(plan_f);
    if (*sim) return CmdSimulate(sim_f);
    if (*sweep) return CmdSweep(sweep_f, sweep_kind, totals, kinds);
    if (*verify) return CmdVerify(verify_f, ds, vs, inject);
    if (*render) return CmdRender(input, svg_out, memory, !no_ascii);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
