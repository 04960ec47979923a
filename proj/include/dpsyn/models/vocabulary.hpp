// Copyright 2026 The dpsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPSYN_MODELS_VOCABULARY_HPP_
#define DPSYN_MODELS_VOCABULARY_HPP_

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace dpsyn::models {

using TokenId = int;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kEosId = 1;
inline constexpr TokenId kUnkId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr int kNumSpecialTokens = 4;

std::vector<std::string> split_whitespace(std::string_view text);

// Dense whitespace-token vocabulary; ids 0..3 are pad, eos, unk, separator.
class Vocabulary {
 public:
  Vocabulary();
  // Every distinct whitespace token of `texts` (frequency cutoff 1), sorted.
  static Vocabulary build(const std::vector<std::string>& texts);

  int size() const { return static_cast<int>(tokens_.size()); }
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  bool is_special(TokenId id) const { return id >= 0 && id < kNumSpecialTokens; }

  std::vector<TokenId> tokenize(std::string_view text) const;
  // Joins non-pad, non-eos, non-separator tokens with single spaces.
  std::string detokenize(const std::vector<TokenId>& ids) const;

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace dpsyn::models

#endif  // DPSYN_MODELS_VOCABULARY_HPP_
