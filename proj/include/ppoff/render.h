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

#ifndef PPOFF_RENDER_H_
#define PPOFF_RENDER_H_

#include <string>
#include <vector>

#include "ppoff/offload.h"
#include "ppoff/schedule.h"

namespace ppoff {

// A pass-line document: compute passes plus any OFFLOAD/RELOAD lines.
struct RenderInput {
  Schedule schedule;
  std::vector<Transfer> transfers;
};

// Accepts what `plan` and `simulate` write. Throws Error(kParse) with the
// line number.
RenderInput ParseRenderInput(const std::string& text);
std::string RenderInputToString(const RenderInput& in);

struct RenderOptions {
  bool memory_strip = false;
  double pixels_per_unit = 0;  // 0 fits the makespan into `width`
  int width = 1200;
  int ascii_columns = 0;       // 0 picks one column per time unit, capped at 160
};

std::string RenderSvg(const RenderInput& in, const RenderOptions& options = {});
std::string RenderAscii(const RenderInput& in, const RenderOptions& options = {});

// Activation count per device over time; a transferred pair is resident on
// the device outside [OFFLOAD end, RELOAD start).
MemoryTimeline RenderMemory(const RenderInput& in);

}  // namespace ppoff

#endif  // PPOFF_RENDER_H_
