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

#include <cmath>
#include <cstdint>
#include <numbers>

namespace focusleak {

/// SplitMix64 generator. Every seeded quantity in the library (surrogate
/// weights, crop draws, findings edits, defense noise) comes from this
/// stream so results are reproducible across platforms and implementations:
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
///
/// uniform() uses the top 53 bits: (next() >> 11) * 2^-53, in [0, 1).
/// normal() is Box-Muller on two uniforms, discarding the second variate.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept { return next() % n; }

  double normal() noexcept {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and a salt.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) noexcept {
  SplitMix64 g(base ^ (salt * 0xD1B54A32D192ED03ULL));
  return g.next();
}

}  // namespace focusleak
