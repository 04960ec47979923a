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

// Compact causal transformer language model trained on
// "<instruction> <sep> <text> <eos>" sequences.

#ifndef DPSYN_MODELS_AUTOREGRESSIVE_HPP_
#define DPSYN_MODELS_AUTOREGRESSIVE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dpsyn/dpsgd/objective.hpp"
#include "dpsyn/models/vocabulary.hpp"
#include "dpsyn/nn/parameters.hpp"
#include "dpsyn/nn/transformer.hpp"
#include "dpsyn/rng.hpp"
#include "json.hpp"

namespace dpsyn::models {

struct ArConfig {
  int vocab_size = 0;
  int embedding_dim = 32;
  int num_layers = 2;
  int num_heads = 4;
  int ff_dim = 64;
  int max_sequence_length = 32;
  // Score only the tokens after the instruction prefix.
  bool mask_instruction = false;
  // Fixed sinusoidal positions instead of a learned table.
  bool sinusoidal_positions = false;

  void validate() const;
  nlohmann::json to_json() const;
  static ArConfig from_json(const nlohmann::json& j);
};

// Token ids plus the length of the conditioning prefix (instruction tokens
// and the separator).
struct TokenSequence {
  std::vector<TokenId> ids;
  int instruction_length = 0;

  int length() const { return static_cast<int>(ids.size()); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// <instruction tokens> <sep> <text tokens> <eos>, truncated to `max_length`
// by dropping text from the end. Throws std::length_error when the
// instruction and separator alone do not fit.
TokenSequence encode(const Vocabulary& vocab, const std::string& instruction,
                     const std::string& text, int max_length);

// The text part of an encoded sequence.
std::string decode_text(const Vocabulary& vocab, const TokenSequence& seq);

struct SamplingOptions {
  int max_new_tokens = 32;
  double temperature = 1.0;
  int top_k = 50;
};

class AutoregressiveLm {
 public:
  explicit AutoregressiveLm(ArConfig config);

  const ArConfig& config() const { return config_; }
  const nn::ParameterLayout& layout() const { return layout_; }
  nn::Index num_parameters() const { return layout_.size(); }

  nn::Vector initial_parameters(std::uint64_t seed) const;

  // (length x vocab) next-token logits for every prefix of `ids`.
  nn::Matrix logits(const nn::Vector& params, const std::vector<TokenId>& ids) const;

  // Mean next-token NLL of one sequence; writes the gradient when `grad` is
  // non-null.
  double sequence_loss(const nn::Vector& params, const TokenSequence& seq,
                       nn::Vector* grad) const;

  // Per-example losses of a batch evaluated jointly: sequences are padded to
  // a common length and pad targets are masked out.
  std::vector<double> nll_loss(const nn::Vector& params,
                               const std::vector<TokenSequence>& batch) const;

  // log p(ids[i] | ids[0..i)) for i = 1..n-1.
  std::vector<double> token_log_probs(const nn::Vector& params,
                                      const std::vector<TokenId>& ids) const;

  // Samples continuation ids after `prefix` until eos (excluded from the
  // result), `max_new_tokens`, or the context limit. Never emits pad.
  std::vector<TokenId> sample(const nn::Vector& params, std::vector<TokenId> prefix,
                              const SamplingOptions& options, Rng& rng) const;

 private:
  struct Forward {
    std::vector<TokenId> ids;
    nn::TransformerStack::Cache stack;
    nn::Matrix hidden;
    nn::Matrix logits;
  };
  void run(const nn::Vector& params, const std::vector<TokenId>& ids, Forward& f,
           bool keep_cache) const;
  // Positions whose next-token prediction is scored.
  int first_scored_target(const TokenSequence& seq) const;

  ArConfig config_;
  nn::ParameterLayout layout_;
  nn::TransformerStack stack_;
  int token_embedding_ = -1;
  int position_embedding_ = -1;
  int output_weight_ = -1;
  int output_bias_ = -1;
};

// Decoded text sampled for `instruction`; excludes the instruction itself.
std::string generate(const AutoregressiveLm& model, const nn::Vector& params,
                     const Vocabulary& vocab, const std::string& instruction,
                     const SamplingOptions& options, Rng& rng);

class ArObjective : public dpsgd::PerExampleObjective {
 public:
  ArObjective(const AutoregressiveLm& model, std::vector<TokenSequence> data)
      : model_(model), data_(std::move(data)) {}

  std::size_t num_examples() const override { return data_.size(); }
  Eigen::Index num_parameters() const override { return model_.num_parameters(); }
  double loss(std::size_t index, const Eigen::VectorXd& params, std::uint64_t,
              Eigen::VectorXd* grad) const override {
    return model_.sequence_loss(params, data_.at(index), grad);
  }
  Eigen::VectorXd private_trainable_mask() const override {
    return model_.layout().private_trainable_mask();
  }

 private:
  const AutoregressiveLm& model_;
  std::vector<TokenSequence> data_;
};

}  // namespace dpsyn::models

#endif  // DPSYN_MODELS_AUTOREGRESSIVE_HPP_
