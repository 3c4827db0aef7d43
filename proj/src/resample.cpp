/* Copyright 2026 The FocusLeak Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "focusleak/resample.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "focusleak/error.hpp"

namespace focusleak {

void ResampleWindow::validate() const {
  if (win_h == 0 || win_w == 0 || out_h == 0 || out_w == 0) {
    throw ContractError("resample window has a zero dimension");
  }
  if (top + win_h > in_h || left + win_w > in_w) {
    throw ContractError("resample window [" + std::to_string(top) + "+" + std::to_string(win_h) +
                        ", " + std::to_string(left) + "+" + std::to_string(win_w) +
                        "] exceeds plane " + std::to_string(in_h) + "x" + std::to_string(in_w));
  }
}

std::vector<AxisTap> axis_taps(std::size_t offset, std::size_t win, std::size_t out) {
  std::vector<AxisTap> taps(out);
  const double scale = static_cast<double>(win) / static_cast<double>(out);
  const double hi_limit = static_cast<double>(win - 1);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, hi_limit);
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, win - 1);
    taps[d] = {offset + lo, offset + hi, src - static_cast<double>(lo)};
  }
  return taps;
}

std::vector<double> resample_plane(std::span<const double> plane, const ResampleWindow& w) {
  w.validate();
  if (plane.size() != w.in_h * w.in_w) {
    throw ContractError("resample_plane: plane size does not match window geometry");
  }
  const auto ys = axis_taps(w.top, w.win_h, w.out_h);
  const auto xs = axis_taps(w.left, w.win_w, w.out_w);
  std::vector<double> out(w.out_h * w.out_w);
  for (std::size_t oy = 0; oy < w.out_h; ++oy) {
    const AxisTap& ty = ys[oy];
    const double* r0 = plane.data() + ty.lo * w.in_w;
    const double* r1 = plane.data() + ty.hi * w.in_w;
    for (std::size_t ox = 0; ox < w.out_w; ++ox) {
      const AxisTap& tx = xs[ox];
      const double top = r0[tx.lo] + (r0[tx.hi] - r0[tx.lo]) * tx.frac;
      const double bot = r1[tx.lo] + (r1[tx.hi] - r1[tx.lo]) * tx.frac;
      out[oy * w.out_w + ox] = top + (bot - top) * ty.frac;
    }
  }
  return out;
}

}  // namespace focusleak
