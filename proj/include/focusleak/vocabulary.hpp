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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace focusleak {

inline constexpr std::size_t kMaxTokens = 64;

struct TokenSeq {
  std::vector<std::size_t> ids;

  std::size_t size() const { return ids.size(); }
  // 1 <= length <= kMaxTokens, every id < vocab_size.
  void validate(std::size_t vocab_size) const;

  bool operator==(const TokenSeq&) const = default;
};

class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::optional<std::size_t> find(std::string_view word) const;
  std::size_t unk_id() const { return unk_; }

  // Lowercases, splits on whitespace and around '.' / ','; unknown words map
  // to "unk".
  TokenSeq tokenize(std::string_view text) const;
  std::string detokenize(const TokenSeq& tokens) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t unk_ = 0;
};

// The 64-word list shipped in data/vocab.txt.
const Vocabulary& default_vocabulary();

// UTF-8, one token per line, line number = id.
Vocabulary load_vocabulary(const std::filesystem::path& path);

// Clinical roles used by findings generation and the judge.
enum class TokenRole { modality, laterality, severity, finding, malignancy, other };

TokenRole token_role(std::string_view word);

// Antonym / severity swap partner (left<->right, mild<->severe, mass<->nodule,
// tumor<->normal, malignant<->benign).
std::optional<std::string_view> swap_partner(std::string_view word);

}  // namespace focusleak
