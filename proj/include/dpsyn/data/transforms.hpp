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

// Label balancing, stratified splitting and synthetic toy corpora.

#ifndef DPSYN_DATA_TRANSFORMS_HPP_
#define DPSYN_DATA_TRANSFORMS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dpsyn/data/records.hpp"
#include "dpsyn/rng.hpp"
#include "json.hpp"

namespace dpsyn::data {

std::map<std::string, std::size_t> label_counts(const Dataset& data);

// Uniformly down-samples every declared label to the smallest label count.
// Kept records stay in input order. Throws DomainError when a declared
// label has no record and UnknownLabelError for undeclared labels.
Dataset balance_labels(const Dataset& data, const std::vector<std::string>& labels, Rng& rng);

struct DatasetSplit {
  Dataset train;
  Dataset validation;  // empty for two-way splits
  Dataset test;
  std::uint64_t split_seed = 0;
};

// Two ratios give (train, test); three give (train, validation, test).
// Records are shuffled within each label and dealt so that every part's
// size is within one record of ratio * N. Throws DomainError on bad ratios
// or when a label has fewer records than there are parts.
DatasetSplit split(const Dataset& data, const std::vector<double>& ratios,
                   std::uint64_t seed);

// Author ids: 1 gives every record its own author; k > 1 gives each author
// k consecutive records.
struct ToySpec {
  std::vector<std::string> labels{"alpha", "beta"};
  int vocab_per_label = 20;
  int shared_vocab = 20;
  int min_length = 4;
  int max_length = 8;
  int n_per_label = 500;
  int records_per_author = 1;
  // Chance that a position draws from the shared vocabulary.
  double shared_rate = 0.3;

  void validate() const;
  nlohmann::json to_json() const;
  static ToySpec from_json(const nlohmann::json& j);
};

// Word j of label l's private vocabulary, and shared word j.
std::string toy_label_word(const std::string& label, int j);
std::string toy_shared_word(int j);

// Texts mix label-specific and shared words; every text carries at least
// one label-specific word, so the label is recoverable from any text.
// Records are grouped by label in spec order.
Dataset make_toy_dataset(const ToySpec& spec, Rng& rng);

}  // namespace dpsyn::data

#endif  // DPSYN_DATA_TRANSFORMS_HPP_
