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

#include "ppoff/render.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "ppoff/error.h"

namespace ppoff {

RenderInput ParseRenderInput(const std::string& text) {
  RenderInput in;
  in.schedule = ParseScheduleString(text);
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    Transfer t;
    std::string kind, start, dur;
    if (!(ls >> t.device >> t.stage >> t.microbatch >> kind >> start >> dur)) continue;
    if (kind != "OFFLOAD" && kind != "RELOAD") continue;
    t.dir = kind == "OFFLOAD" ? Direction::kD2H : Direction::kH2D;
    try {
      t.start = Rational::parse(start);
      t.duration = Rational::parse(dur);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (t.device < 0 || t.device >= in.schedule.d)
      throw Error(ErrorCode::kParse, "line " + std::to_string(lineno) + ": device out of range");
    in.transfers.push_back(t);
  }
  return in;
}

std::string RenderInputToString(const RenderInput& in) {
  std::ostringstream os;
  WriteSchedule(os, in.schedule);
  for (const Transfer& t : in.transfers)
    os << t.device << ' ' << t.stage << ' ' << t.microbatch << ' '
       << (t.dir == Direction::kD2H ? "OFFLOAD" : "RELOAD") << ' ' << t.start << ' ' << t.duration << '\n';
  return os.str();
}

MemoryTimeline RenderMemory(const RenderInput& in) {
  const Schedule& s = in.schedule;
  std::map<std::tuple<int, int>, const Transfer*> d2h, h2d;
  for (const Transfer& t : in.transfers) (t.dir == Direction::kD2H ? d2h : h2d)[{t.stage, t.microbatch}] = &t;
  PassIndex index(s);
  std::vector<Residency> rs;
  for (const auto& passes : s.device_passes)
    for (const Pass& f : passes) {
      if (f.kind != PassKind::kForward) continue;
      const Pass* b = index.Find(PassKind::kBackward, f.stage, f.microbatch);
      Time end = b ? b->end() : f.end();
      int w = f.stage < static_cast<int>(s.stage_weight.size()) ? s.stage_weight[f.stage] : 1;
      auto off = d2h.find({f.stage, f.microbatch});
      auto on = h2d.find({f.stage, f.microbatch});
      if (off != d2h.end() && on != h2d.end()) {
        rs.push_back({f.device, f.stage, w, f.start, off->second->end()});
        rs.push_back({f.device, f.stage, w, on->second->start, end});
      } else {
        rs.push_back({f.device, f.stage, w, f.start, end});
      }
    }
  return BuildTimeline(s, rs, 1);
}

namespace {

constexpr double kLeft = 56, kTop = 16, kRow = 22, kXferRow = 12, kStrip = 32, kGap = 8;

std::string Num(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

std::string RenderSvg(const RenderInput& in, const RenderOptions& options) {
  const Schedule& s = in.schedule;
  Time span = s.Makespan();
  for (const Transfer& t : in.transfers) span = max(span, t.end());
  double scale = options.pixels_per_unit;
  if (scale <= 0) scale = span > 0 ? (options.width - kLeft - 8) / span.to_double() : 1;

  std::vector<bool> has_xfer(s.d, false);
  for (const Transfer& t : in.transfers) has_xfer[t.device] = true;
  MemoryTimeline mem;
  std::int64_t peak = 1;
  if (options.memory_strip) {
    mem = RenderMemory(in);
    for (int dev = 0; dev < s.d; ++dev) peak = std::max(peak, mem.PeakCount(dev));
  }

  std::ostringstream body;
  double y = kTop;
  for (int dev = 0; dev < s.d; ++dev) {
    body << "<g class=\"device\" id=\"device-" << dev << "\">\n";
    body << "<text class=\"label\" x=\"4\" y=\"" << Num(y + kRow * 0.7) << "\">dev " << dev << "</text>\n";
    std::vector<int> stages = s.DeviceStages(dev);
    for (const Pass& p : s.device_passes[dev]) {
      double x = kLeft + p.start.to_double() * scale, w = p.duration.to_double() * scale;
      bool first = !stages.empty() && p.stage == stages.front();
      body << "<rect class=\"" << PassKindName(p.kind) << (first ? " first" : "") << "\" x=\"" << Num(x)
           << "\" y=\"" << Num(y) << "\" width=\"" << Num(w) << "\" height=\"" << Num(kRow)
           << "\"><title>" << PassKindName(p.kind) << " stage " << p.stage << " mb " << p.microbatch << " ["
           << p.start << ", " << p.end() << ")</title></rect>\n";
      if (w >= 10)
        body << "<text class=\"mb\" x=\"" << Num(x + w / 2) << "\" y=\"" << Num(y + kRow * 0.7) << "\">"
             << p.microbatch << "</text>\n";
    }
    y += kRow;
    if (has_xfer[dev]) {
      body << "<text class=\"label small\" x=\"4\" y=\"" << Num(y + kXferRow * 0.85) << "\">xfer</text>\n";
      for (const Transfer& t : in.transfers) {
        if (t.device != dev) continue;
        const char* cls = t.dir == Direction::kD2H ? "OFFLOAD" : "RELOAD";
        body << "<rect class=\"" << cls << "\" x=\"" << Num(kLeft + t.start.to_double() * scale) << "\" y=\""
             << Num(y) << "\" width=\"" << Num(t.duration.to_double() * scale) << "\" height=\""
             << Num(kXferRow) << "\"><title>" << cls << " stage " << t.stage << " mb " << t.microbatch
             << "</title></rect>\n";
      }
      y += kXferRow;
    }
    if (options.memory_strip) {
      const auto& pts = mem.devices[dev].points;
      double base = y + kStrip;
      std::ostringstream path;
      path << "M" << Num(kLeft) << ' ' << Num(base);
      for (const MemoryPoint& p : pts) {
        double x = kLeft + p.time.to_double() * scale;
        path << " H" << Num(x) << " V" << Num(base - kStrip * static_cast<double>(p.count) / peak);
      }
      path << " H" << Num(kLeft + span.to_double() * scale) << " V" << Num(base);
      body << "<path class=\"memory\" d=\"" << path.str() << "\"><title>peak " << mem.PeakCount(dev)
           << "</title></path>\n";
      y += kStrip;
    }
    body << "</g>\n";
    y += kGap;
  }

  double width = s.d == 0 ? 0 : kLeft + span.to_double() * scale + 8;
  double height = s.d == 0 ? 0 : y + kTop;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Num(width) << "\" height=\"" << Num(height)
     << "\" viewBox=\"0 0 " << Num(width) << ' ' << Num(height) << "\">\n";
  os << "<style>\n"
        ".F{fill:#8fb8de}.B{fill:#6aa86a}.W{fill:#c9b458}.OFFLOAD{fill:#d66}.RELOAD{fill:#e9a15a}\n"
        "rect{stroke:#333;stroke-width:0.5}.first{stroke-width:1.5}\n"
        ".memory{fill:#bbb;stroke:#555;stroke-width:0.5}\n"
        "text{font-family:monospace;font-size:10px}.mb{text-anchor:middle;font-size:8px}.small{font-size:8px}\n"
        "</style>\n";
  os << body.str() << "</svg>\n";
  return os.str();
}

std::string RenderAscii(const RenderInput& in, const RenderOptions& options) {
  const Schedule& s = in.schedule;
  Time span = s.Makespan();
  for (const Transfer& t : in.transfers) span = max(span, t.end());
  if (s.d == 0 || span <= 0) return "";
  int cols = options.ascii_columns;
  if (cols <= 0) cols = static_cast<int>(std::min<std::int64_t>(160, std::max<std::int64_t>(1, span.ceil())));
  Time cell = span / Time(cols);

  // A cell shows the pass covering its midpoint.
  auto fill = [&](std::string& row, const Time& start, const Time& end, char c) {
    bool any = false;
    for (int i = 0; i < cols; ++i) {
      Time mid = cell * Time(i) + cell / Time(2);
      if (start <= mid && mid < end) row[i] = c, any = true;
    }
    // Short items still get one column.
    if (!any && end > start) row[std::min<std::int64_t>(cols - 1, (start / cell).floor())] = c;
  };
  std::vector<bool> has_xfer(s.d, false);
  for (const Transfer& t : in.transfers) has_xfer[t.device] = true;

  std::ostringstream os;
  for (int dev = 0; dev < s.d; ++dev) {
    std::string row(cols, '.');
    for (const Pass& p : s.device_passes[dev]) fill(row, p.start, p.end(), PassKindName(p.kind)[0]);
    os << "dev" << dev << (dev < 10 ? "  " : " ") << '|' << row << "|\n";
    if (has_xfer[dev]) {
      std::string x(cols, ' ');
      for (const Transfer& t : in.transfers)
        if (t.device == dev) fill(x, t.start, t.end(), t.dir == Direction::kD2H ? '>' : '<');
      os << "  io  |" << x << "|\n";
    }
  }
  os << "F forward, B backward, W weight, > offload, < reload; one column = " << cell << '\n';
  return os.str();
}

}  // namespace ppoff
