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

#include "focusleak/vocabulary.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <utility>

#include "focusleak/error.hpp"

namespace focusleak {

void TokenSeq::validate(std::size_t vocab_size) const {
  if (ids.empty() || ids.size() > kMaxTokens) {
    throw ContractError("token sequence length " + std::to_string(ids.size()) + " outside [1, " +
                        std::to_string(kMaxTokens) + "]");
  }
  for (std::size_t id : ids) {
    if (id >= vocab_size) {
      throw ContractError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab_size));
    }
  }
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  if (words_.empty()) throw ContractError("vocabulary is empty");
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second) throw ContractError("duplicate vocabulary word '" + words_[i] + "'");
  }
  const auto unk = find("unk");
  unk_ = unk.value_or(0);
}

std::optional<std::size_t> Vocabulary::find(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenSeq Vocabulary::tokenize(std::string_view text) const {
  TokenSeq out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.ids.push_back(find(cur).value_or(unk_));
      cur.clear();
    }
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      flush();
    } else if (ch == '.' || ch == ',') {
      flush();
      cur.push_back(ch);
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  flush();
  return out;
}

std::string Vocabulary::detokenize(const TokenSeq& tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += word(tokens.ids[i]);
  }
  return out;
}

const Vocabulary& default_vocabulary() {
  static const Vocabulary vocab({
      "unk",      ".",         ",",          "xray",       "mri",     "ct",       "ultrasound", "mammogram",
      "dermoscopy", "left",    "right",      "mild",       "moderate", "severe",  "no",         "mass",
      "nodule",   "effusion",  "tumor",      "normal",     "malignant", "benign", "the",        "a",
      "of",       "in",        "on",         "with",       "and",     "is",       "there",      "shows",
      "image",    "scan",      "findings",   "lung",       "chest",   "brain",    "breast",     "skin",
      "liver",    "lesion",    "region",     "lobe",       "upper",   "lower",    "small",      "large",
      "evidence", "suggestive", "consistent", "noted",     "seen",    "without",  "likely",     "impression",
      "patient",  "study",     "view",       "opacity",    "tissue",  "wall",     "size",       "side",
  });
  return vocab;
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    words.push_back(line);
  }
  return Vocabulary(std::move(words));
}

namespace {

constexpr std::array<std::pair<std::string_view, TokenRole>, 19> kRoles = {{
    {"xray", TokenRole::modality},     {"mri", TokenRole::modality},       {"ct", TokenRole::modality},
    {"ultrasound", TokenRole::modality}, {"mammogram", TokenRole::modality}, {"dermoscopy", TokenRole::modality},
    {"left", TokenRole::laterality},   {"right", TokenRole::laterality},   {"mild", TokenRole::severity},
    {"moderate", TokenRole::severity}, {"severe", TokenRole::severity},    {"no", TokenRole::severity},
    {"mass", TokenRole::finding},      {"nodule", TokenRole::finding},     {"effusion", TokenRole::finding},
    {"tumor", TokenRole::finding},     {"normal", TokenRole::finding},     {"malignant", TokenRole::malignancy},
    {"benign", TokenRole::malignancy},
}};

constexpr std::array<std::pair<std::string_view, std::string_view>, 5> kSwaps = {{
    {"left", "right"}, {"mild", "severe"}, {"mass", "nodule"}, {"tumor", "normal"}, {"malignant", "benign"},
}};

}  // namespace

TokenRole token_role(std::string_view word) {
  for (const auto& [w, role] : kRoles) {
    if (w == word) return role;
  }
  return TokenRole::other;
}

std::optional<std::string_view> swap_partner(std::string_view word) {
  for (const auto& [a, b] : kSwaps) {
    if (a == word) return b;
    if (b == word) return a;
  }
  return std::nullopt;
}

}  // namespace focusleak
