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

#include "focusleak/region.hpp"

#include <algorithm>
#include <deque>

#include "focusleak/error.hpp"

namespace focusleak {

BinaryMask heuristic_foreground_mask(const Image& image, double threshold, double min_component_frac) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ContractError("foreground threshold must lie in (0,1)");
  if (!(min_component_frac >= 0.0 && min_component_frac < 1.0)) {
    throw ContractError("min_component_frac must lie in [0,1)");
  }
  const std::size_t h = image.height, w = image.width, total = h * w;
  const auto lum = luminance(image);
  BinaryMask cand(h, w);
  for (std::size_t i = 0; i < total; ++i) cand.bits[i] = lum[i] > threshold ? 1 : 0;

  const std::size_t n_cand = cand.popcount();
  if (n_cand == 0) {
    throw SegmentationError(SegmentationError::Kind::empty_foreground,
                            "no pixel exceeds the foreground threshold; supply a mask file instead");
  }
  if (n_cand == total) {
    throw SegmentationError(SegmentationError::Kind::full_foreground,
                            "every pixel exceeds the foreground threshold; no background to attack");
  }

  std::vector<int> label(total, -1);
  std::vector<std::vector<std::size_t>> components;
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < total; ++start) {
    if (!cand.bits[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(components.size());
    components.emplace_back();
    label[start] = id;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      components.back().push_back(p);
      const std::size_t y = p / w, x = p % w;
      const std::size_t nbr[4] = {y > 0 ? p - w : p, y + 1 < h ? p + w : p, x > 0 ? p - 1 : p,
                                  x + 1 < w ? p + 1 : p};
      for (std::size_t q : nbr) {
        if (q != p && cand.bits[q] && label[q] < 0) {
          label[q] = id;
          queue.push_back(q);
        }
      }
    }
  }

  const double min_area = min_component_frac * static_cast<double>(total);
  BinaryMask fg(h, w);
  bool any = false;
  for (const auto& comp : components) {
    if (static_cast<double>(comp.size()) >= min_area) {
      any = true;
      for (std::size_t p : comp) fg.bits[p] = 1;
    }
  }
  if (!any) {
    const auto largest = std::max_element(components.begin(), components.end(),
                                          [](const auto& a, const auto& b) { return a.size() < b.size(); });
    for (std::size_t p : *largest) fg.bits[p] = 1;
  }
  return fg;
}

namespace {

// Largest square over available cells; size 0 if none.
Square best_square(const std::vector<std::uint8_t>& avail, std::size_t h, std::size_t w) {
  std::vector<std::size_t> dp(h * w, 0);
  Square best;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t p = i * w + j;
      if (!avail[p]) continue;
      if (i == 0 || j == 0) {
        dp[p] = 1;
      } else {
        dp[p] = 1 + std::min({dp[p - w], dp[p - 1], dp[p - w - 1]});
      }
      const std::size_t s = dp[p];
      const Square cand{i + 1 - s, j + 1 - s, s};
      if (s > best.size || (s == best.size && (cand.top < best.top ||
                                               (cand.top == best.top && cand.left < best.left)))) {
        best = cand;
      }
    }
  }
  return best;
}

}  // namespace

PatchSet top_k_squares(const BinaryMask& background, std::size_t k, std::vector<std::string>* warnings) {
  if (k == 0) throw ContractError("top_k_squares: k must be >= 1");
  if (background.popcount() == 0) throw ContractError("top_k_squares: background is empty");
  const std::size_t h = background.height, w = background.width;
  std::vector<std::uint8_t> avail = background.bits;
  PatchSet out;
  while (out.squares.size() < k) {
    const Square s = best_square(avail, h, w);
    const std::size_t min_size = out.squares.empty() ? 1 : 2;
    if (s.size < min_size) break;
    out.squares.push_back(s);
    for (std::size_t y = s.top; y < s.top + s.size; ++y)
      for (std::size_t x = s.left; x < s.left + s.size; ++x) avail[y * w + x] = 0;
  }
  if (warnings && out.squares.size() < k) {
    warnings->push_back("only " + std::to_string(out.squares.size()) + " of " + std::to_string(k) +
                        " background squares available");
  }
  return out;
}

Square brute_force_top_square(const BinaryMask& background) {
  if (background.popcount() == 0) throw ContractError("brute_force_top_square: background is empty");
  const std::size_t h = background.height, w = background.width;
  for (std::size_t size = std::min(h, w); size >= 1; --size) {
    for (std::size_t top = 0; top + size <= h; ++top) {
      for (std::size_t left = 0; left + size <= w; ++left) {
        bool all = true;
        for (std::size_t y = top; y < top + size && all; ++y)
          for (std::size_t x = left; x < left + size && all; ++x) all = background.at(y, x) != 0;
        if (all) return {top, left, size};
      }
    }
  }
  return {};  // unreachable: a non-empty background has a 1x1 square
}

BinaryMask squares_to_mask(const PatchSet& patches, std::size_t height, std::size_t width) {
  BinaryMask mask(height, width);
  for (const Square& s : patches.squares) {
    if (s.size == 0 || s.top + s.size > height || s.left + s.size > width) {
      throw ContractError("square (" + std::to_string(s.top) + "," + std::to_string(s.left) + "," +
                          std::to_string(s.size) + ") outside " + std::to_string(height) + "x" +
                          std::to_string(width));
    }
    for (std::size_t y = s.top; y < s.top + s.size; ++y) {
      for (std::size_t x = s.left; x < s.left + s.size; ++x) {
        if (mask.at(y, x)) throw ContractError("squares overlap at (" + std::to_string(y) + "," + std::to_string(x) + ")");
        mask.at(y, x) = 1;
      }
    }
  }
  return mask;
}

}  // namespace focusleak
