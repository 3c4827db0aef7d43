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

#include "focusleak/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "focusleak/error.hpp"

namespace focusleak {

std::string_view to_string(DefenseKind kind) { return kind == DefenseKind::gaussian ? "gaussian" : "compress"; }

DefenseKind parse_defense_kind(std::string_view text) {
  if (text == "gaussian") return DefenseKind::gaussian;
  if (text == "compress") return DefenseKind::compress;
  throw ContractError("unknown defense '" + std::string(text) + "' (expected gaussian or compress)");
}

void DefenseConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ContractError("defense sigma must be finite and >= 0");
  if (bits < 1 || bits > 8) throw ContractError("defense bits must be in [1, 8], got " + std::to_string(bits));
  if (down_factor < 1) throw ContractError("defense down_factor must be >= 1");
}

Image gaussian_defense(const Image& image, double sigma, SplitMix64& rng) {
  if (!(sigma >= 0.0)) throw ContractError("gaussian_defense: sigma must be >= 0");
  if (sigma == 0.0) return image;
  Image out = image;
  for (double& v : out.pixels) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
  return out;
}

Image compression_proxy_defense(const Image& image, unsigned bits, std::size_t down_factor) {
  DefenseConfig{DefenseKind::compress, 0.0, bits, down_factor, 0}.validate();
  Image q = image;
  const double levels = static_cast<double>((1u << bits) - 1u);
  for (double& v : q.pixels) v = std::round(v * levels) / levels;
  if (down_factor == 1) return q;
  const std::size_t h = std::max<std::size_t>(1, image.height / down_factor);
  const std::size_t w = std::max<std::size_t>(1, image.width / down_factor);
  Image up = resize(resize(q, h, w), image.height, image.width);
  for (double& v : up.pixels) v = std::clamp(v, 0.0, 1.0);
  return up;
}

Image apply_defense(const Image& image, const DefenseConfig& config) {
  config.validate();
  if (config.kind == DefenseKind::gaussian) {
    SplitMix64 rng(config.seed);
    return gaussian_defense(image, config.sigma, rng);
  }
  return compression_proxy_defense(image, config.bits, config.down_factor);
}

}  // namespace focusleak
