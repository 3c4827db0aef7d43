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

#include "doctest.h"
#include "focusleak/error.hpp"
#include "focusleak/vocabulary.hpp"

using namespace focusleak;

TEST_SUITE("vocabulary") {
  TEST_CASE("shipped word list matches the built-in one") {
    const Vocabulary file = load_vocabulary(FOCUSLEAK_DATA_DIR "/vocab.txt");
    const Vocabulary& builtin = default_vocabulary();
    REQUIRE(file.size() == builtin.size());
    CHECK(builtin.size() == kMaxTokens);
    for (std::size_t i = 0; i < builtin.size(); ++i) CHECK(file.word(i) == builtin.word(i));
    CHECK_THROWS_AS(load_vocabulary("/nonexistent/vocab.txt"), IoError);
  }

  TEST_CASE("tokenize examples") {
    const Vocabulary& v = default_vocabulary();
    const TokenSeq t = v.tokenize("MRI shows Left mass, likely benign.");
    CHECK(v.detokenize(t) == "mri shows left mass , likely benign .");
    CHECK(v.tokenize("zebra").ids == std::vector<std::size_t>{v.unk_id()});
    CHECK(v.tokenize("   ").size() == 0);
    TokenSeq long_seq;
    long_seq.ids.assign(kMaxTokens + 1, 3);
    CHECK_THROWS_AS(long_seq.validate(v.size()), ContractError);
    CHECK_THROWS_AS(TokenSeq{{64}}.validate(v.size()), ContractError);
  }

  TEST_CASE("roles and swap partners") {
    CHECK(token_role("mri") == TokenRole::modality);
    CHECK(token_role("left") == TokenRole::laterality);
    CHECK(token_role("tumor") == TokenRole::finding);
    CHECK(token_role("benign") == TokenRole::malignancy);
    CHECK(token_role("lung") == TokenRole::other);
    CHECK(swap_partner("left") == "right");
    CHECK(swap_partner("severe") == "mild");
    CHECK(swap_partner("normal") == "tumor");
    CHECK_FALSE(swap_partner("mri").has_value());
    CHECK_FALSE(swap_partner("moderate").has_value());
  }
}
