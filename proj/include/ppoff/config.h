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

#ifndef PPOFF_CONFIG_H_
#define PPOFF_CONFIG_H_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ppoff/analysis.h"

namespace ppoff {

// Named model shape. Layers are whole-model; a stage gets layers / (d·v).
struct ModelPreset {
  std::string name;
  int layers;
  std::int64_t hidden_size;
};

const std::vector<ModelPreset>& ModelPresets();
const ModelPreset* FindPreset(const std::string& name);

// "tF,tB,tW,comm" with each field a rational ("1", "3/2", "0.25").
PassCosts ParseCosts(const std::string& text);
std::string CostsToString(const PassCosts& costs);

ContentionMode ParseContention(const std::string& text);

struct RunConfig {
  ModelSpec model;
  HardwareSpec hardware;
  std::string preset;     // empty when none
  int total_layers = 0;   // 0 keeps model.layers_per_stage as given
  ScheduleKind kind = ScheduleKind::kGIS;
  int d = 4;
  int v = 2;
  int m = 0;  // 0 means 4d
  int g = 0;
  OffloadChoice offload;
  ContentionMode contention = ContentionMode::kNone;
  bool topology_sync = false;
  std::optional<PassCosts> costs;  // estimated from the model when absent
  std::optional<Rational> k;       // computed from model and hardware when absent
  std::string out_dir = ".";

  int microbatches() const { return m > 0 ? m : 4 * d; }
  // Model with layers_per_stage = max(1, total_layers / (d·v)).
  ModelSpec StageModel() const;
  PassCosts Costs() const;
  Rational K() const;
  // k · (F + B + W) in the cost unit.
  Time RoundTrip() const;
  // Referential checks; throws Error.
  void Validate() const;
  std::vector<std::string> Warnings() const;
  RunSpec ToRunSpec() const;

  nlohmann::json ToJson() const;
  // Missing keys keep their defaults. Unknown keys are rejected.
  static RunConfig FromJson(const nlohmann::json& j);
  static RunConfig Load(const std::string& path);
};

}  // namespace ppoff

#endif  // PPOFF_CONFIG_H_
