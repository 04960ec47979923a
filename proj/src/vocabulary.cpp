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

#include "dpsyn/models/vocabulary.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace dpsyn::models {

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* s : {"<pad>", "<eos>", "<unk>", "<sep>"}) add(s);
}

void Vocabulary::add(std::string token) {
  if (index_.count(token) != 0) return;
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  std::set<std::string> words;
  for (const auto& t : texts) {
    for (auto& w : split_whitespace(t)) words.insert(std::move(w));
  }
  Vocabulary v;
  for (const auto& w : words) v.add(w);
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_whitespace(text)) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::detokenize(const std::vector<TokenId>& ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == kPadId || id == kEosId || id == kSepId) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

nlohmann::json Vocabulary::to_json() const { return tokens_; }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  const auto tokens = j.get<std::vector<std::string>>();
  Vocabulary v;
  if (tokens.size() < kNumSpecialTokens ||
      !std::equal(v.tokens_.begin(), v.tokens_.end(), tokens.begin())) {
    throw std::invalid_argument("vocabulary must start with the four special tokens");
  }
  for (std::size_t i = kNumSpecialTokens; i < tokens.size(); ++i) v.add(tokens[i]);
  if (v.tokens_.size() != tokens.size()) {
    throw std::invalid_argument("vocabulary contains duplicate tokens");
  }
  return v;
}

}  // namespace dpsyn::models
