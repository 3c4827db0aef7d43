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

#include <cmath>

#include "doctest.h"
#include "focusleak/defenses.hpp"
#include "focusleak/error.hpp"
#include "support.hpp"

using namespace focusleak;

TEST_SUITE("defenses") {
  TEST_CASE("gaussian defense examples") {
    SplitMix64 rng(1);
    const Image img = testing::random_image(rng, 16, 16, 3, 0.0, 1.0);
    CHECK(gaussian_defense(img, 0.0, rng) == img);

    const Image gray(64, 64, 1, 0.5);
    for (int run = 0; run < 10; ++run) {
      SplitMix64 r(static_cast<std::uint64_t>(run));
      const Image out = gaussian_defense(gray, 8.0 / 255.0, r);
      double mean = 0.0, var = 0.0;
      for (double v : out.pixels) mean += v;
      mean /= static_cast<double>(out.pixels.size());
      for (double v : out.pixels) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(out.pixels.size() - 1));
      CHECK(sd >= 6.0 / 255.0);
      CHECK(sd <= 10.0 / 255.0);
    }

    SplitMix64 r(4);
    for (double v : gaussian_defense(img, 0.5, r).pixels) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    SplitMix64 a(9), b(9);
    CHECK(gaussian_defense(img, 0.1, a) == gaussian_defense(img, 0.1, b));
    CHECK_THROWS_AS(gaussian_defense(img, -0.1, r), ContractError);
  }

  TEST_CASE("compression proxy examples") {
    SplitMix64 rng(2);
    const Image img = testing::random_image(rng, 20, 24, 1, 0.0, 1.0);
    const Image same = compression_proxy_defense(img, 8, 1);
    CHECK(same.height == 20);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(std::abs(same.pixels[i] - img.pixels[i]) <= 0.5 / 255.0);

    for (double v : compression_proxy_defense(img, 1, 1).pixels) CHECK((v == 0.0 || v == 1.0));

    const Image flat(20, 24, 3, 0.4);
    for (unsigned bits : {1u, 3u, 8u}) {
      for (std::size_t f : {1u, 2u, 3u, 7u}) {
        const Image out = compression_proxy_defense(flat, bits, f);
        CHECK(out.height == 20);
        CHECK(out.width == 24);
        CHECK(out.channels == 3);
        for (double v : out.pixels) CHECK(v == doctest::Approx(out.pixels[0]).epsilon(1e-15));
      }
    }
    CHECK(compression_proxy_defense(img, 4, 3) == compression_proxy_defense(img, 4, 3));
    CHECK_THROWS_AS(compression_proxy_defense(img, 0, 1), ContractError);
    CHECK_THROWS_AS(compression_proxy_defense(img, 9, 1), ContractError);
    CHECK_THROWS_AS(compression_proxy_defense(img, 4, 0), ContractError);
  }

  TEST_CASE("defenses preserve range and shape") {
    SplitMix64 rng(7);
    for (int i = 0; i < 40; ++i) {
      const Image img = testing::random_image(rng, 5 + rng.below(30), 5 + rng.below(30), rng.below(2) ? 3 : 1, 0.0, 1.0);
      DefenseConfig c;
      c.kind = i % 2 ? DefenseKind::compress : DefenseKind::gaussian;
      c.sigma = rng.uniform(0.0, 0.3);
      c.bits = 1 + static_cast<unsigned>(rng.below(8));
      c.down_factor = 1 + rng.below(4);
      c.seed = rng.next();
      const Image out = apply_defense(img, c);
      CHECK(out.height == img.height);
      CHECK(out.width == img.width);
      CHECK(out.channels == img.channels);
      for (double v : out.pixels) CHECK((v >= 0.0 && v <= 1.0));
      CHECK(out == apply_defense(img, c));
    }
  }

  TEST_CASE("defense config") {
    CHECK(parse_defense_kind("gaussian") == DefenseKind::gaussian);
    CHECK(parse_defense_kind("compress") == DefenseKind::compress);
    CHECK(to_string(DefenseKind::compress) == "compress");
    CHECK_THROWS_AS(parse_defense_kind("jpeg"), ContractError);
    DefenseConfig c;
    CHECK_NOTHROW(c.validate());
    c.bits = 9;
    CHECK_THROWS_AS(c.validate(), ContractError);
    c = DefenseConfig{};
    c.sigma = -1.0;
    CHECK_THROWS_AS(c.validate(), ContractError);
    c = DefenseConfig{};
    c.down_factor = 0;
    CHECK_THROWS_AS(c.validate(), ContractError);
  }
}
