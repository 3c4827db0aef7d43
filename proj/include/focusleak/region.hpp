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
#include <stdexcept>
#include <string>
#include <vector>

#include "focusleak/image.hpp"

namespace focusleak {

class SegmentationError : public std::runtime_error {
 public:
  enum class Kind { empty_foreground, full_foreground };
  SegmentationError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct Square {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t size = 0;

  bool operator==(const Square&) const = default;
};

// Disjoint squares ordered by (size desc, top asc, left asc).
struct PatchSet {
  std::vector<Square> squares;

  bool operator==(const PatchSet&) const = default;
};

// Stand-in for a learned segmenter: foreground candidates are pixels with
// luminance > threshold; keeps the 4-connected candidate components whose
// area is at least min_component_frac of the image, or the largest one if
// none qualifies.
BinaryMask heuristic_foreground_mask(const Image& image, double threshold, double min_component_frac);

// Greedy top-k: recompute the maximal-square table over still-available
// background cells, take the largest square (ties: smallest top, then left),
// retire its cells, repeat. Later rounds need size >= 2. When fewer than k
// squares exist a warning is appended to `warnings` if given.
PatchSet top_k_squares(const BinaryMask& background, std::size_t k,
                       std::vector<std::string>* warnings = nullptr);

// Exhaustive search for the largest all-background square, same tie-break.
Square brute_force_top_square(const BinaryMask& background);

// Union of the squares; throws ContractError on overlap or out-of-grid squares.
BinaryMask squares_to_mask(const PatchSet& patches, std::size_t height, std::size_t width);

}  // namespace focusleak
