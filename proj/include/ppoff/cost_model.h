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

#ifndef PPOFF_COST_MODEL_H_
#define PPOFF_COST_MODEL_H_

#include <cstdint>
#include <optional>

#include "ppoff/rational.h"

namespace ppoff {

// Seconds-valued durations are rounded to femtoseconds.
inline constexpr std::int64_t kTimeGrid = 1'000'000'000'000'000;

// Transformer shape for one pipeline stage.
struct ModelSpec {
  std::int64_t hidden_size = 4096;       // h
  std::int64_t sequence_length = 4096;   // s, tokens
  std::int64_t microbatch_size = 1;      // b, sequences
  std::int64_t layers_per_stage = 1;     // L
  int bytes_per_element = 2;

  // Throws Error(kInvalidConfig) when a field is out of range.
  void Validate() const;
};

struct HardwareSpec {
  double compute_bandwidth = 220e12;  // B_c, FLOP/s
  double transfer_bandwidth = 15e9;   // B_o, byte/s per direction
  double p2p_latency = 0.0;           // seconds
  int devices_per_switch = 2;
  std::optional<double> host_memory_capacity;  // bytes

  void Validate() const;
};

// Per-stage, per-microbatch pass durations.
struct PassCosts {
  Time forward = 1;
  Time backward = 1;  // activation-gradient part
  Time weight = 1;    // weight-gradient part
  Time comm = 0;      // device-to-device activation handoff

  Time total() const { return forward + backward + weight; }
  void Validate() const;

  static PassCosts Unit() { return PassCosts{}; }
};

// Relative F : B : W split used by EstimatePassCosts.
struct PassRatios {
  double forward = 1.0;
  double backward = 1.0;
  double weight = 1.0;
};

// 34·b·s·h without recomputation and 20·b·s·h with the cheap layers
// (LayerNorm, GeLU, dropout) recomputed. Both coefficients count 2-byte
// elements, so the result scales with bytes_per_element / 2.
std::int64_t ActivationBytesPerLayer(const ModelSpec& model, bool recompute);

// Activation bytes of one layer divided by its output tensor (2·b·s·h at
// 2 bytes per element). 20/2 under recompute accounting.
double LayerOutputRatio(const ModelSpec& model);

// Offload round-trip time over compute time for one layer:
//   k = 10 / (3 (6h + s)) · B_c / B_o
double ComputeK(const ModelSpec& model, const HardwareSpec& hw);

// Time to move one stage's recompute-accounted activations to the host and
// back. The two directions run back to back on the link, so this is
// 2 · 20bsh · L / B_o. Dividing by the per-stage F+B+W time reproduces
// ComputeK exactly: 2·20 / (12 (6h + s)) = 10 / (3 (6h + s)).
double OffloadRoundTrip(const ModelSpec& model, const HardwareSpec& hw);

// Total F+B+W FLOPs of one layer: 12·b·s·h·(6h + s).
double LayerFlops(const ModelSpec& model);

// Splits 12·b·s·h·(6h+s)·L / B_c across F, B and W by `ratios`. T_comm is
// the hardware p2p latency. F and B are rounded onto kTimeGrid and W takes
// the remainder, so the total is off by at most one grid step.
PassCosts EstimatePassCosts(const ModelSpec& model, const HardwareSpec& hw,
                            const PassRatios& ratios = {});

}  // namespace ppoff

#endif  // PPOFF_COST_MODEL_H_
