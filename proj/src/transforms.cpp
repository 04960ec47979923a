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

#include "dpsyn/data/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpsyn/errors.hpp"

namespace dpsyn::data {

std::map<std::string, std::size_t> label_counts(const Dataset& data) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : data) ++counts[r.label];
  return counts;
}

Dataset balance_labels(const Dataset& data, const std::vector<std::string>& labels, Rng& rng) {
  check_labels(data, labels);
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (const auto& l : labels) by_label[l];
  for (std::size_t i = 0; i < data.size(); ++i) by_label[data[i].label].push_back(i);
  std::size_t target = data.size();
  for (const auto& [label, indices] : by_label) {
    if (indices.empty()) throw DomainError("label \"" + label + "\" has no records");
    target = std::min(target, indices.size());
  }
  std::vector<char> keep(data.size(), 0);
  // Labels in declaration order so the draw sequence is stable.
  for (const auto& l : labels) {
    auto& indices = by_label[l];
    std::shuffle(indices.begin(), indices.end(), rng);
    for (std::size_t k = 0; k < target; ++k) keep[indices[k]] = 1;
  }
  Dataset out;
  out.reserve(target * by_label.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (keep[i]) out.push_back(data[i]);
  }
  return out;
}

DatasetSplit split(const Dataset& data, const std::vector<double>& ratios,
                   std::uint64_t seed) {
  if (ratios.size() != 2 && ratios.size() != 3) {
    throw DomainError("split needs two or three ratios");
  }
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw DomainError("split ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("split ratios must sum to 1");

  Rng rng = make_rng(seed, {stream::kSplit});
  std::vector<std::size_t> order;
  order.reserve(data.size());
  for (const auto& label : labels_of(data)) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].label == label) group.push_back(i);
    }
    if (group.size() < ratios.size()) {
      throw DomainError("label \"" + label + "\" has fewer records than split parts");
    }
    std::shuffle(group.begin(), group.end(), rng);
    order.insert(order.end(), group.begin(), group.end());
  }

  // Deal each record to the part furthest behind its quota; every part
  // ends within one record of ratio * N and each label is spread evenly.
  std::vector<Dataset*> parts;
  DatasetSplit out;
  out.split_seed = seed;
  parts.push_back(&out.train);
  if (ratios.size() == 3) parts.push_back(&out.validation);
  parts.push_back(&out.test);
  std::vector<std::size_t> assigned(ratios.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t p = 0; p < ratios.size(); ++p) {
      const double deficit = static_cast<double>(k + 1) * ratios[p] - assigned[p];
      if (deficit > best_deficit + 1e-9) {
        best_deficit = deficit;
        best = p;
      }
    }
    ++assigned[best];
    parts[best]->push_back(data[order[k]]);
  }
  return out;
}

void ToySpec::validate() const {
  if (labels.empty()) throw DomainError("toy spec needs labels");
  if (vocab_per_label < 1 || shared_vocab < 0) throw DomainError("toy vocabularies too small");
  if (min_length < 1 || max_length < min_length) throw DomainError("bad toy length range");
  if (n_per_label < 1 || records_per_author < 1) throw DomainError("toy counts must be >= 1");
  if (!(shared_rate >= 0.0 && shared_rate < 1.0)) throw DomainError("shared_rate in [0, 1)");
  for (std::size_t a = 0; a < labels.size(); ++a) {
    for (std::size_t b = a + 1; b < labels.size(); ++b) {
      if (labels[a] == labels[b]) throw DomainError("duplicate toy label");
    }
  }
}

nlohmann::json ToySpec::to_json() const {
  return {{"labels", labels},           {"vocab_per_label", vocab_per_label},
          {"shared_vocab", shared_vocab}, {"min_length", min_length},
          {"max_length", max_length},     {"n_per_label", n_per_label},
          {"records_per_author", records_per_author}, {"shared_rate", shared_rate}};
}

ToySpec ToySpec::from_json(const nlohmann::json& j) {
  ToySpec s;
  s.labels = j.value("labels", s.labels);
  s.vocab_per_label = j.value("vocab_per_label", s.vocab_per_label);
  s.shared_vocab = j.value("shared_vocab", s.shared_vocab);
  s.min_length = j.value("min_length", s.min_length);
  s.max_length = j.value("max_length", s.max_length);
  s.n_per_label = j.value("n_per_label", s.n_per_label);
  s.records_per_author = j.value("records_per_author", s.records_per_author);
  s.shared_rate = j.value("shared_rate", s.shared_rate);
  s.validate();
  return s;
}

std::string toy_label_word(const std::string& label, int j) {
  return label + "-" + std::to_string(j);
}

std::string toy_shared_word(int j) { return "shared-" + std::to_string(j); }

Dataset make_toy_dataset(const ToySpec& spec, Rng& rng) {
  spec.validate();
  std::uniform_int_distribution<int> length(spec.min_length, spec.max_length);
  std::uniform_int_distribution<int> own(0, spec.vocab_per_label - 1);
  std::uniform_int_distribution<int> shared(0, std::max(spec.shared_vocab - 1, 0));
  std::bernoulli_distribution use_shared(spec.shared_vocab > 0 ? spec.shared_rate : 0.0);
  Dataset data;
  data.reserve(spec.labels.size() * spec.n_per_label);
  for (const auto& label : spec.labels) {
    for (int n = 0; n < spec.n_per_label; ++n) {
      const int len = length(rng);
      std::vector<std::string> words(len);
      bool has_own = false;
      for (auto& w : words) {
        if (use_shared(rng)) {
          w = toy_shared_word(shared(rng));
        } else {
          w = toy_label_word(label, own(rng));
          has_own = true;
        }
      }
      if (!has_own) {
        const int pos = std::uniform_int_distribution<int>(0, len - 1)(rng);
        words[pos] = toy_label_word(label, own(rng));
      }
      LabeledText r;
      for (const auto& w : words) r.text += (r.text.empty() ? "" : " ") + w;
      r.label = label;
      const std::size_t index = data.size();
      r.author_id = "author-" + std::to_string(index / spec.records_per_author);
      data.push_back(std::move(r));
    }
  }
  return data;
}

}  // namespace dpsyn::data
