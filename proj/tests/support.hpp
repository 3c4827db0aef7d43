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

// Synthetic fixtures shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "focusleak/image.hpp"
#include "focusleak/rng.hpp"

namespace focusleak::testing {

// Dark textured background (0.1..0.3) with one bright elliptical blob.
inline Image synthetic_scan(std::uint64_t seed, std::size_t side = 64) {
  SplitMix64 rng(seed);
  Image img(side, side, 1);
  const double cy = rng.uniform(0.35, 0.65) * side, cx = rng.uniform(0.35, 0.65) * side;
  const double ry = rng.uniform(0.12, 0.2) * side, rx = rng.uniform(0.12, 0.2) * side;
  const double fy = rng.uniform(0.1, 0.4), fx = rng.uniform(0.1, 0.4), ph = rng.uniform(0.0, 6.28);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double dy = (y - cy) / ry, dx = (x - cx) / rx;
      double v = 0.2 + 0.06 * std::sin(fy * y + fx * x + ph) + 0.03 * (rng.uniform() - 0.5);
      if (dy * dy + dx * dx < 1.0) v = 0.8 + 0.1 * std::cos(0.5 * (dx + dy)) + 0.04 * (rng.uniform() - 0.5);
      img.at(0, y, x) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

// Pixels strictly inside (lo, hi), so clamping never engages.
inline Image random_image(SplitMix64& rng, std::size_t h, std::size_t w, std::size_t c = 1, double lo = 0.1,
                          double hi = 0.9) {
  Image img(h, w, c);
  for (double& v : img.pixels) v = rng.uniform(lo, hi);
  return img;
}

inline BinaryMask random_mask(SplitMix64& rng, std::size_t h, std::size_t w, double density) {
  BinaryMask m(h, w);
  for (auto& b : m.bits) b = rng.uniform() < density ? 1 : 0;
  return m;
}

}  // namespace focusleak::testing
