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

// Label-balanced synthetic corpora sampled from a trained generator.

#ifndef DPSYN_EVAL_CORPUS_HPP_
#define DPSYN_EVAL_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpsyn/data/prompt.hpp"
#include "dpsyn/data/records.hpp"
#include "dpsyn/models/autoregressive.hpp"
#include "dpsyn/models/diffusion.hpp"
#include "dpsyn/privacy/accountant.hpp"
#include "dpsyn/rng.hpp"
#include "json.hpp"

namespace dpsyn::eval {

// Maps an instruction to one sampled text. Throwing or returning an empty
// string counts as a failed attempt.
class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::string id() const = 0;
  virtual std::string generate(const std::string& instruction, Rng& rng) const = 0;
};

class AutoregressiveGenerator : public TextGenerator {
 public:
  AutoregressiveGenerator(const models::AutoregressiveLm& model, nn::Vector params,
                          const models::Vocabulary& vocab, models::SamplingOptions options)
      : model_(model), params_(std::move(params)), vocab_(vocab), options_(options) {}
  std::string id() const override { return "autoregressive"; }
  std::string generate(const std::string& instruction, Rng& rng) const override {
    return models::generate(model_, params_, vocab_, instruction, options_, rng);
  }

 private:
  const models::AutoregressiveLm& model_;
  nn::Vector params_;
  const models::Vocabulary& vocab_;
  models::SamplingOptions options_;
};

class DiffusionGenerator : public TextGenerator {
 public:
  DiffusionGenerator(const models::DiffusionLm& model, nn::Vector params,
                     const models::Vocabulary& vocab, bool clamp)
      : model_(model), params_(std::move(params)), vocab_(vocab), clamp_(clamp) {}
  std::string id() const override { return "diffusion"; }
  std::string generate(const std::string& instruction, Rng& rng) const override {
    return models::generate(model_, params_, vocab_, instruction, rng, clamp_);
  }

 private:
  const models::DiffusionLm& model_;
  nn::Vector params_;
  const models::Vocabulary& vocab_;
  bool clamp_;
};

struct GenerationSpec {
  int n_per_label = 500;
  std::uint64_t seed = 0;
  // Extra attempts after a failed one.
  int max_retries = 3;
};

struct SyntheticRecord {
  std::string text;  // empty when every attempt failed
  std::string label;
  std::string generator;
  std::uint64_t seed = 0;  // seed of the successful (or last) attempt
  bool failed = false;

  friend bool operator==(const SyntheticRecord&, const SyntheticRecord&) = default;
};

struct SyntheticCorpus {
  std::vector<SyntheticRecord> records;
  privacy::PrivacyBudget provenance;

  std::size_t num_failed() const;
  // Successful records only, as classifier training data.
  data::Dataset as_dataset() const;
};

// n_per_label samples for every label of `tmpl`, labels in template order.
// Deterministic given spec.seed.
SyntheticCorpus generate_corpus(const TextGenerator& generator,
                                const data::PromptTemplate& tmpl, const GenerationSpec& spec,
                                const privacy::PrivacyBudget& provenance);

// JSONL lines {text, label, generator, seed, failed}.
void write_corpus(const std::filesystem::path& path, const SyntheticCorpus& corpus);
std::vector<SyntheticRecord> read_corpus(const std::filesystem::path& path);

}  // namespace dpsyn::eval

#endif  // DPSYN_EVAL_CORPUS_HPP_
