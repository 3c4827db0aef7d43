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

#include <vector>

#include "doctest.h"
#include "focusleak/error.hpp"
#include "focusleak/region.hpp"
#include "support.hpp"

using namespace focusleak;

namespace {

Image block_canvas(std::size_t side, std::size_t top, std::size_t left, std::size_t size) {
  Image img(side, side, 1, 0.0);
  for (std::size_t y = top; y < top + size; ++y)
    for (std::size_t x = left; x < left + size; ++x) img.at(0, y, x) = 1.0;
  return img;
}

}  // namespace

TEST_SUITE("region") {
  TEST_CASE("heuristic mask examples") {
    const Image img = block_canvas(32, 5, 9, 8);
    const BinaryMask m = heuristic_foreground_mask(img, 0.5, 0.01);
    CHECK(m.popcount() == 64);
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) CHECK(m.at(y, x) == (y >= 5 && y < 13 && x >= 9 && x < 17 ? 1 : 0));

    try {
      heuristic_foreground_mask(Image(8, 8, 1, 1.0), 0.5, 0.01);
      FAIL("expected SegmentationError");
    } catch (const SegmentationError& e) {
      CHECK(e.kind() == SegmentationError::Kind::full_foreground);
    }
    try {
      heuristic_foreground_mask(Image(8, 8, 1, 0.0), 0.5, 0.01);
      FAIL("expected SegmentationError");
    } catch (const SegmentationError& e) {
      CHECK(e.kind() == SegmentationError::Kind::empty_foreground);
    }

    // Area 100 and area 3 on 64x64: 0.01 * 4096 = 40.96, so only the large one stays.
    Image two = block_canvas(64, 10, 10, 10);
    for (std::size_t x = 40; x < 43; ++x) two.at(0, 50, x) = 1.0;
    const BinaryMask kept = heuristic_foreground_mask(two, 0.5, 0.01);
    CHECK(kept.popcount() == 100);
    CHECK(kept.at(50, 41) == 0);

    // No component qualifies: the largest one is kept.
    Image small = block_canvas(64, 2, 2, 3);
    small.at(0, 60, 60) = 1.0;
    CHECK(heuristic_foreground_mask(small, 0.5, 0.5).popcount() == 9);

    CHECK_THROWS_AS(heuristic_foreground_mask(img, 1.0, 0.01), ContractError);
  }

  TEST_CASE("color luminance drives the threshold") {
    Image img(4, 4, 3, 0.0);
    img.at(1, 1, 1) = 1.0;  // pure green: 0.587 > 0.5
    img.at(2, 2, 2) = 1.0;  // pure blue: 0.114 < 0.5
    const BinaryMask m = heuristic_foreground_mask(img, 0.5, 0.0);
    CHECK(m.popcount() == 1);
    CHECK(m.at(1, 1) == 1);
  }

  TEST_CASE("top_k_squares examples") {
    const BinaryMask full(8, 8, 1);
    const PatchSet one = top_k_squares(full, 1);
    REQUIRE(one.squares.size() == 1);
    CHECK(one.squares[0] == Square{0, 0, 8});

    std::vector<std::string> warnings;
    const PatchSet two = top_k_squares(full, 2, &warnings);
    CHECK(two.squares.size() == 1);
    CHECK(warnings.size() == 1);

    CHECK_THROWS_AS(top_k_squares(BinaryMask(4, 4, 0), 1), ContractError);
    CHECK_THROWS_AS(top_k_squares(full, 0), ContractError);
  }

  TEST_CASE("brute force examples") {
    BinaryMask single(5, 5);
    single.at(3, 1) = 1;
    CHECK(brute_force_top_square(single) == Square{3, 1, 1});

    BinaryMask ell(10, 10);
    for (std::size_t y = 0; y < 10; ++y)
      for (std::size_t x = 0; x < 3; ++x) ell.at(y, x) = 1;
    for (std::size_t y = 7; y < 10; ++y)
      for (std::size_t x = 0; x < 10; ++x) ell.at(y, x) = 1;
    CHECK(brute_force_top_square(ell).size == 3);
    CHECK(brute_force_top_square(ell) == top_k_squares(ell, 1).squares[0]);
  }

  TEST_CASE("first square matches brute force on random masks") {
    SplitMix64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
      const BinaryMask m = testing::random_mask(rng, 24, 24, rng.uniform(0.3, 0.9));
      if (m.popcount() == 0) continue;
      const Square expected = brute_force_top_square(m);
      const PatchSet ps = top_k_squares(m, 3);
      REQUIRE(!ps.squares.empty());
      CHECK(ps.squares[0] == expected);
    }
  }

  TEST_CASE("patch set invariants") {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t h = 8 + rng.below(30), w = 8 + rng.below(30);
      const BinaryMask fg = testing::random_mask(rng, h, w, rng.uniform(0.05, 0.5));
      const BinaryMask bg = fg.complement();
      if (bg.popcount() == 0) continue;
      const std::size_t k = 1 + rng.below(12);
      const PatchSet ps = top_k_squares(bg, k);
      CHECK(ps.squares.size() >= 1);
      CHECK(ps.squares.size() <= k);
      CHECK(ps == top_k_squares(bg, k));
      std::size_t area = 0;
      for (std::size_t i = 0; i < ps.squares.size(); ++i) {
        area += ps.squares[i].size * ps.squares[i].size;
        if (i > 0) {
          CHECK(ps.squares[i].size <= ps.squares[i - 1].size);
          CHECK(ps.squares[i].size >= 2);
        }
      }
      const BinaryMask mk = squares_to_mask(ps, h, w);
      CHECK(mk.popcount() == area);
      for (std::size_t i = 0; i < mk.bits.size(); ++i) CHECK((mk.bits[i] & fg.bits[i]) == 0);
    }
  }

  TEST_CASE("squares_to_mask examples") {
    CHECK(squares_to_mask(PatchSet{{Square{0, 0, 2}}}, 4, 4).popcount() == 4);
    CHECK(squares_to_mask(PatchSet{{Square{0, 0, 3}, Square{5, 5, 3}}}, 8, 8).popcount() == 18);
    CHECK_THROWS_AS(squares_to_mask(PatchSet{{Square{0, 0, 3}, Square{2, 2, 2}}}, 8, 8), ContractError);
    CHECK_THROWS_AS(squares_to_mask(PatchSet{{Square{6, 6, 3}}}, 8, 8), ContractError);
  }
}
