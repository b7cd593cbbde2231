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

#include "ppoff/cost_model.h"

#include <string>

#include "ppoff/error.h"

namespace ppoff {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
      return "invalid-config";
    case ErrorCode::kInvalidG:
      return "invalid-g";
    case ErrorCode::kTooFewMicrobatches:
      return "too-few-microbatches";
    case ErrorCode::kInfeasibleInterval:
      return "infeasible-interval";
    case ErrorCode::kDeadlock:
      return "deadlock";
    case ErrorCode::kParse:
      return "parse-error";
  }
  return "error";
}

namespace {

// Per-element coefficients of the activation footprint, in 2-byte units.
constexpr std::int64_t kFullActivationCoeff = 34;
constexpr std::int64_t kRecomputeActivationCoeff = 20;
constexpr std::int64_t kLayerOutputCoeff = 2;

void Require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, what);
}

}  // namespace

void ModelSpec::Validate() const {
  Require(hidden_size >= 1, "hidden_size must be >= 1");
  Require(sequence_length >= 1, "sequence_length must be >= 1");
  Require(microbatch_size >= 1, "microbatch_size must be >= 1");
  Require(layers_per_stage >= 1, "layers_per_stage must be >= 1");
  Require(bytes_per_element == 1 || bytes_per_element == 2 || bytes_per_element == 4,
          "bytes_per_element must be 1, 2 or 4");
}

void HardwareSpec::Validate() const {
  Require(compute_bandwidth > 0, "compute_bandwidth must be > 0");
  Require(transfer_bandwidth > 0, "transfer_bandwidth must be > 0");
  Require(p2p_latency >= 0, "p2p_latency must be >= 0");
  Require(devices_per_switch >= 1, "devices_per_switch must be >= 1");
  Require(!host_memory_capacity || *host_memory_capacity > 0, "host_memory_capacity must be > 0");
}

void PassCosts::Validate() const {
  Require(forward >= 0 && backward >= 0 && weight >= 0 && comm >= 0, "pass costs must be >= 0");
  Require(backward + weight > 0, "T_B + T_W must be > 0");
}

std::int64_t ActivationBytesPerLayer(const ModelSpec& model, bool recompute) {
  model.Validate();
  std::int64_t coeff = recompute ? kRecomputeActivationCoeff : kFullActivationCoeff;
  // coeff counts 2-byte elements: coeff·bsh·(bytes/2) == coeff/2·bsh·bytes.
  return coeff * model.microbatch_size * model.sequence_length * model.hidden_size *
         model.bytes_per_element / 2;
}

double LayerOutputRatio(const ModelSpec& model) {
  double output = static_cast<double>(kLayerOutputCoeff) * model.microbatch_size *
                  model.sequence_length * model.hidden_size * model.bytes_per_element / 2.0;
  return static_cast<double>(ActivationBytesPerLayer(model, true)) / output;
}

double ComputeK(const ModelSpec& model, const HardwareSpec& hw) {
  model.Validate();
  hw.Validate();
  double h = static_cast<double>(model.hidden_size);
  double s = static_cast<double>(model.sequence_length);
  return 10.0 / (3.0 * (6.0 * h + s)) * hw.compute_bandwidth / hw.transfer_bandwidth;
}

double LayerFlops(const ModelSpec& model) {
  double b = static_cast<double>(model.microbatch_size);
  double s = static_cast<double>(model.sequence_length);
  double h = static_cast<double>(model.hidden_size);
  return 12.0 * b * s * h * (6.0 * h + s);
}

double OffloadRoundTrip(const ModelSpec& model, const HardwareSpec& hw) {
  hw.Validate();
  double payload = static_cast<double>(ActivationBytesPerLayer(model, true)) *
                   static_cast<double>(model.layers_per_stage);
  return 2.0 * payload / hw.transfer_bandwidth;
}

PassCosts EstimatePassCosts(const ModelSpec& model, const HardwareSpec& hw,
                            const PassRatios& ratios) {
  model.Validate();
  hw.Validate();
  Require(ratios.forward >= 0 && ratios.backward >= 0 && ratios.weight >= 0,
          "pass ratios must be >= 0");
  double ratio_sum = ratios.forward + ratios.backward + ratios.weight;
  Require(ratio_sum > 0 && ratios.backward + ratios.weight > 0, "pass ratios must leave B+W > 0");
  double total = LayerFlops(model) * static_cast<double>(model.layers_per_stage) /
                 hw.compute_bandwidth;
  // Round the total once so F + B + W reproduces it to one grid step.
  Time exact_total = Rational::from_double(total, kTimeGrid);
  PassCosts costs;
  costs.forward = Rational::from_double(total * ratios.forward / ratio_sum, kTimeGrid);
  costs.backward = Rational::from_double(total * ratios.backward / ratio_sum, kTimeGrid);
  costs.weight = exact_total - costs.forward - costs.backward;
  if (costs.weight < 0) costs.weight = 0;
  costs.comm = Rational::from_double(hw.p2p_latency, kTimeGrid);
  return costs;
}

}  // namespace ppoff
