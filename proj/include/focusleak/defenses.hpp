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
#include <cstdint>
#include <string_view>

#include "focusleak/image.hpp"
#include "focusleak/rng.hpp"

namespace focusleak {

enum class DefenseKind { gaussian, compress };

std::string_view to_string(DefenseKind kind);
DefenseKind parse_defense_kind(std::string_view text);

struct DefenseConfig {
  DefenseKind kind = DefenseKind::gaussian;
  double sigma = 8.0 / 255.0;
  unsigned bits = 4;
  std::size_t down_factor = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

// Adds i.i.d. N(0, sigma^2) noise and clamps to [0,1]. sigma = 0 returns
// the input unchanged.
Image gaussian_defense(const Image& image, double sigma, SplitMix64& rng);

// Quantizes to 2^bits levels, downsamples by down_factor (bilinear), and
// resizes back to the original shape.
Image compression_proxy_defense(const Image& image, unsigned bits, std::size_t down_factor);

Image apply_defense(const Image& image, const DefenseConfig& config);

}  // namespace focusleak
