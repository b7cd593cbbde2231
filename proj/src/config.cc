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

#include "ppoff/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "ppoff/error.h"

namespace ppoff {

using nlohmann::json;

const std::vector<ModelPreset>& ModelPresets() {
  static const std::vector<ModelPreset> presets = {
      {"5.8B", 32, 4096},  {"10.5B", 38, 5120},  {"18.1B", 46, 6144},
      {"42.9B", 62, 8192}, {"66.6B", 62, 10240}, {"83.8B", 78, 10240},
  };
  return presets;
}

const ModelPreset* FindPreset(const std::string& name) {
  for (const ModelPreset& p : ModelPresets())
    if (p.name == name) return &p;
  return nullptr;
}

PassCosts ParseCosts(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() != 4)
    throw Error(ErrorCode::kInvalidConfig, "costs must be tF,tB,tW,comm, got '" + text + "'");
  PassCosts c;
  try {
    c.forward = Rational::parse(parts[0]);
    c.backward = Rational::parse(parts[1]);
    c.weight = Rational::parse(parts[2]);
    c.comm = Rational::parse(parts[3]);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidConfig, "bad number in costs '" + text + "'");
  }
  c.Validate();
  return c;
}

std::string CostsToString(const PassCosts& c) {
  return c.forward.to_string() + "," + c.backward.to_string() + "," + c.weight.to_string() + "," +
         c.comm.to_string();
}

ContentionMode ParseContention(const std::string& text) {
  if (text == "none") return ContentionMode::kNone;
  if (text == "switch") return ContentionMode::kSwitchHalving;
  throw Error(ErrorCode::kInvalidConfig, "contention must be none or switch, got '" + text + "'");
}

ModelSpec RunConfig::StageModel() const {
  ModelSpec s = model;
  if (total_layers > 0) s.layers_per_stage = std::max<std::int64_t>(1, total_layers / (static_cast<std::int64_t>(d) * v));
  return s;
}

PassCosts RunConfig::Costs() const { return costs ? *costs : EstimatePassCosts(StageModel(), hardware); }

Rational RunConfig::K() const {
  if (k) return *k;
  return Rational::from_double(ComputeK(model, hardware), 1'000'000);
}

Time RunConfig::RoundTrip() const {
  // Estimated costs live on kTimeGrid; keep the round trip there too so
  // denominators stay small.
  if (!costs) return Rational::from_double(K().to_double() * Costs().total().to_double(), kTimeGrid);
  return K() * Costs().total();
}

void RunConfig::Validate() const {
  model.Validate();
  hardware.Validate();
  if (d < 1 || v < 1 || m < 0)
    throw Error(ErrorCode::kInvalidConfig, "d and v must be positive and m non-negative");
  if (g != 0 && kind != ScheduleKind::kGISG)
    throw Error(ErrorCode::kInvalidConfig, "g is only meaningful with gis-g");
  if (kind == ScheduleKind::kGISG && g == 0) throw Error(ErrorCode::kInvalidG, "gis-g needs --g");
  int local = kind == ScheduleKind::kOneFOneB || kind == ScheduleKind::kOneFOneBFullOffload ? 1 : v;
  if (offload.StagesFor(local) > local)
    throw Error(ErrorCode::kInvalidConfig, "offload count " + std::to_string(offload.count) +
                                               " exceeds the " + std::to_string(local) + " stages per device");
  if (k && *k < 0) throw Error(ErrorCode::kInvalidConfig, "k must be non-negative");
  if (costs) costs->Validate();
}

std::vector<std::string> RunConfig::Warnings() const {
  std::vector<std::string> w;
  bool full = offload.mode == OffloadChoice::Mode::kFull || kind == ScheduleKind::kOneFOneBFullOffload;
  if (full && K() > 1) w.push_back("full offload exceeds k budget (k = " + K().to_string() + ")");
  return w;
}

RunSpec RunConfig::ToRunSpec() const {
  RunSpec s;
  s.kind = kind;
  s.d = d;
  s.v = v;
  s.m = microbatches();
  s.g = g;
  s.costs = Costs();
  s.offload = offload;
  s.round_trip = RoundTrip();
  s.contention = contention;
  s.topology_sync = topology_sync;
  s.hardware = hardware;
  s.model = StageModel();
  return s;
}

json RunConfig::ToJson() const {
  json j;
  j["model"] = {{"hidden_size", model.hidden_size},
                {"sequence_length", model.sequence_length},
                {"microbatch_size", model.microbatch_size},
                {"layers_per_stage", model.layers_per_stage},
                {"bytes_per_element", model.bytes_per_element}};
  if (!preset.empty()) j["model"]["preset"] = preset;
  if (total_layers > 0) j["model"]["layers"] = total_layers;
  j["hardware"] = {{"compute_bandwidth", hardware.compute_bandwidth},
                   {"transfer_bandwidth", hardware.transfer_bandwidth},
                   {"p2p_latency", hardware.p2p_latency},
                   {"devices_per_switch", hardware.devices_per_switch}};
  if (hardware.host_memory_capacity) j["hardware"]["host_memory_capacity"] = *hardware.host_memory_capacity;
  j["schedule"] = {{"kind", ScheduleKindName(kind)}, {"d", d}, {"v", v}, {"m", microbatches()}};
  if (g != 0) j["schedule"]["g"] = g;
  j["offload"] = offload.ToString();
  j["contention"] = contention == ContentionMode::kNone ? "none" : "switch";
  j["topology_sync"] = topology_sync;
  if (costs) j["costs"] = CostsToString(*costs);
  if (k) j["k"] = k->to_string();
  j["out"] = out_dir;
  return j;
}

namespace {

void RejectUnknown(const json& j, const char* where, std::set<std::string> known) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, std::string(where) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw Error(ErrorCode::kInvalidConfig, "unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void Get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::FromJson(const json& j) {
  RunConfig c;
  try {
    RejectUnknown(j, "config",
                  {"model", "hardware", "schedule", "offload", "contention", "topology_sync", "costs", "k", "out"});
    if (j.contains("model")) {
      const json& m = j["model"];
      RejectUnknown(m, "model",
                    {"preset", "layers", "hidden_size", "sequence_length", "microbatch_size", "layers_per_stage",
                     "bytes_per_element"});
      if (m.contains("preset")) {
        c.preset = m["preset"].get<std::string>();
        const ModelPreset* p = FindPreset(c.preset);
        if (!p) throw Error(ErrorCode::kInvalidConfig, "unknown preset '" + c.preset + "'");
        c.total_layers = p->layers;
        c.model.hidden_size = p->hidden_size;
      }
      Get(m, "layers", c.total_layers);
      Get(m, "hidden_size", c.model.hidden_size);
      Get(m, "sequence_length", c.model.sequence_length);
      Get(m, "microbatch_size", c.model.microbatch_size);
      Get(m, "layers_per_stage", c.model.layers_per_stage);
      Get(m, "bytes_per_element", c.model.bytes_per_element);
    }
    if (j.contains("hardware")) {
      const json& h = j["hardware"];
      RejectUnknown(h, "hardware",
                    {"compute_bandwidth", "transfer_bandwidth", "p2p_latency", "devices_per_switch",
                     "host_memory_capacity"});
      Get(h, "compute_bandwidth", c.hardware.compute_bandwidth);
      Get(h, "transfer_bandwidth", c.hardware.transfer_bandwidth);
      Get(h, "p2p_latency", c.hardware.p2p_latency);
      Get(h, "devices_per_switch", c.hardware.devices_per_switch);
      if (h.contains("host_memory_capacity")) c.hardware.host_memory_capacity = h["host_memory_capacity"].get<double>();
    }
    if (j.contains("schedule")) {
      const json& s = j["schedule"];
      RejectUnknown(s, "schedule", {"kind", "d", "v", "m", "g"});
      if (s.contains("kind")) {
        std::string name = s["kind"].get<std::string>();
        auto kind = ParseScheduleKind(name);
        if (!kind) throw Error(ErrorCode::kInvalidConfig, "unknown schedule '" + name + "'");
        c.kind = *kind;
      }
      Get(s, "d", c.d);
      Get(s, "v", c.v);
      Get(s, "m", c.m);
      Get(s, "g", c.g);
    }
    if (j.contains("offload")) {
      const json& o = j["offload"];
      c.offload = OffloadChoice::Parse(o.is_number_integer() ? std::to_string(o.get<int>()) : o.get<std::string>());
    }
    if (j.contains("contention")) c.contention = ParseContention(j["contention"].get<std::string>());
    Get(j, "topology_sync", c.topology_sync);
    if (j.contains("costs")) c.costs = ParseCosts(j["costs"].get<std::string>());
    if (j.contains("k")) {
      const json& k = j["k"];
      c.k = k.is_string() ? Rational::parse(k.get<std::string>()) : Rational::from_double(k.get<double>(), 1'000'000);
    }
    Get(j, "out", c.out_dir);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidConfig, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
  return FromJson(j);
}

}  // namespace ppoff
