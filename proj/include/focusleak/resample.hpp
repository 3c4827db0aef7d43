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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace focusleak {

// A rectangular source window in an in_h x in_w plane, resampled bilinearly
// to out_h x out_w. Sampling uses the align-corners-false convention:
// src = (dst + 0.5) * (win / out) - 0.5, clamped to the window borders.
struct ResampleWindow {
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t win_h = 0;
  std::size_t win_w = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;

  static ResampleWindow full(std::size_t in_h, std::size_t in_w, std::size_t out_h,
                             std::size_t out_w) {
    return {in_h, in_w, 0, 0, in_h, in_w, out_h, out_w};
  }

  void validate() const;
};

// One interpolation axis: absolute source indices lo/hi and the fraction
// toward hi.
struct AxisTap {
  std::size_t lo;
  std::size_t hi;
  double frac;
};

std::vector<AxisTap> axis_taps(std::size_t offset, std::size_t win, std::size_t out);

// Resamples one plane of in_h*in_w row-major values.
std::vector<double> resample_plane(std::span<const double> plane, const ResampleWindow& w);

}  // namespace focusleak
