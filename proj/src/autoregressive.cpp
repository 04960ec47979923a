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

#include "dpsyn/models/autoregressive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dpsyn/errors.hpp"

namespace dpsyn::models {

using nn::Index;
using nn::Matrix;
using nn::Vector;

void ArConfig::validate() const {
  if (vocab_size <= kNumSpecialTokens) {
    throw std::invalid_argument("ArConfig: vocab_size must exceed the special tokens");
  }
  if (embedding_dim <= 0 || num_layers < 0 || num_heads <= 0 || ff_dim <= 0 ||
      max_sequence_length < 2) {
    throw std::invalid_argument("ArConfig: sizes must be positive");
  }
  if (embedding_dim % num_heads != 0) {
    throw std::invalid_argument("ArConfig: embedding_dim must be divisible by num_heads");
  }
}

nlohmann::json ArConfig::to_json() const {
  return {{"vocab_size", vocab_size},
          {"embedding_dim", embedding_dim},
          {"num_layers", num_layers},
          {"num_heads", num_heads},
          {"ff_dim", ff_dim},
          {"max_sequence_length", max_sequence_length},
          {"mask_instruction", mask_instruction},
          {"sinusoidal_positions", sinusoidal_positions}};
}

ArConfig ArConfig::from_json(const nlohmann::json& j) {
  ArConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.max_sequence_length = j.value("max_sequence_length", c.max_sequence_length);
  c.mask_instruction = j.value("mask_instruction", c.mask_instruction);
  c.sinusoidal_positions = j.value("sinusoidal_positions", c.sinusoidal_positions);
  return c;
}

TokenSequence encode(const Vocabulary& vocab, const std::string& instruction,
                     const std::string& text, int max_length) {
  TokenSequence seq;
  seq.ids = vocab.tokenize(instruction);
  seq.ids.push_back(kSepId);
  if (static_cast<int>(seq.ids.size()) > max_length) {
    throw std::length_error("instruction does not fit in the maximum sequence length");
  }
  seq.instruction_length = static_cast<int>(seq.ids.size());
  for (TokenId id : vocab.tokenize(text)) seq.ids.push_back(id);
  seq.ids.push_back(kEosId);
  if (static_cast<int>(seq.ids.size()) > max_length) seq.ids.resize(max_length);
  return seq;
}

std::string decode_text(const Vocabulary& vocab, const TokenSequence& seq) {
  std::vector<TokenId> text;
  for (int i = seq.instruction_length; i < seq.length(); ++i) {
    if (seq.ids[i] == kEosId) break;
    text.push_back(seq.ids[i]);
  }
  return vocab.detokenize(text);
}

AutoregressiveLm::AutoregressiveLm(ArConfig config) : config_(config) {
  config_.validate();
  const Index v = config_.vocab_size;
  const Index d = config_.embedding_dim;
  token_embedding_ = layout_.add("tok_emb", v, d);
  if (!config_.sinusoidal_positions) {
    position_embedding_ =
        layout_.add("pos_emb", config_.max_sequence_length, d, /*positional=*/true);
  }
  nn::TransformerConfig tc;
  tc.d_model = config_.embedding_dim;
  tc.num_heads = config_.num_heads;
  tc.num_layers = config_.num_layers;
  tc.d_ff = config_.ff_dim;
  tc.causal = true;
  stack_ = nn::TransformerStack(layout_, tc, "decoder");
  output_weight_ = layout_.add("out.weight", v, d);
  output_bias_ = layout_.add("out.bias", v, 1);
}

Vector AutoregressiveLm::initial_parameters(std::uint64_t seed) const {
  Vector params = Vector::Zero(layout_.size());
  Rng rng = make_rng(seed, {stream::kInit});
  nn::fill_normal(layout_.view(params, token_embedding_), 1.0, rng);
  if (position_embedding_ >= 0) {
    nn::fill_normal(layout_.view(params, position_embedding_), 0.5, rng);
  }
  stack_.initialize(layout_, params, rng);
  nn::fill_normal(layout_.view(params, output_weight_),
                  1.0 / std::sqrt(static_cast<double>(config_.embedding_dim)), rng);
  layout_.view(params, output_bias_).setZero();
  return params;
}

void AutoregressiveLm::run(const Vector& params, const std::vector<TokenId>& ids,
                           Forward& f, bool keep_cache) const {
  const Index n = static_cast<Index>(ids.size());
  if (n == 0) throw std::invalid_argument("empty token sequence");
  if (n > config_.max_sequence_length) {
    throw std::invalid_argument("sequence longer than max_sequence_length");
  }
  const auto tok = layout_.view(params, token_embedding_);
  Matrix x(n, config_.embedding_dim);
  for (Index i = 0; i < n; ++i) {
    const TokenId id = ids[i];
    if (id < 0 || id >= config_.vocab_size) throw std::out_of_range("token id out of range");
    x.row(i) = tok.row(id);
    if (position_embedding_ >= 0) {
      x.row(i) += layout_.view(params, position_embedding_).row(i);
    } else {
      x.row(i) += nn::sinusoidal_features(static_cast<double>(i), config_.embedding_dim)
                      .transpose();
    }
  }
  f.ids = ids;
  f.hidden = stack_.forward(layout_, params, x, keep_cache ? &f.stack : nullptr);
  f.logits = nn::linear_forward(f.hidden, layout_.view(params, output_weight_),
                                layout_.view(params, output_bias_));
}

Matrix AutoregressiveLm::logits(const Vector& params, const std::vector<TokenId>& ids) const {
  Forward f;
  run(params, ids, f, false);
  return f.logits;
}

int AutoregressiveLm::first_scored_target(const TokenSequence& seq) const {
  return config_.mask_instruction ? std::max(seq.instruction_length, 1) : 1;
}

double AutoregressiveLm::sequence_loss(const Vector& params, const TokenSequence& seq,
                                       Vector* grad) const {
  Forward f;
  run(params, seq.ids, f, grad != nullptr);
  const int n = seq.length();
  const int first = first_scored_target(seq);
  const int count = std::max(n - first, 0);
  if (grad != nullptr) grad->setZero(layout_.size());
  if (count == 0) return 0.0;

  const Matrix logp = nn::log_softmax_rows(f.logits);
  double loss = 0.0;
  for (int target = first; target < n; ++target) loss -= logp(target - 1, seq.ids[target]);
  loss /= count;
  if (!std::isfinite(loss)) throw NumericError("non-finite sequence loss");
  if (grad == nullptr) return loss;

  Matrix dlogits = Matrix::Zero(n, config_.vocab_size);
  for (int target = first; target < n; ++target) {
    const int row = target - 1;
    dlogits.row(row) = logp.row(row).array().exp();
    dlogits(row, seq.ids[target]) -= 1.0;
  }
  dlogits /= count;
  const Matrix dhidden =
      nn::linear_backward(dlogits, f.hidden, layout_.view(params, output_weight_),
                          layout_.view(*grad, output_weight_),
                          layout_.view(*grad, output_bias_));
  const Matrix dx = stack_.backward(layout_, params, f.stack, dhidden, *grad);
  auto dtok = layout_.view(*grad, token_embedding_);
  for (int i = 0; i < n; ++i) {
    dtok.row(seq.ids[i]) += dx.row(i);
    if (position_embedding_ >= 0) layout_.view(*grad, position_embedding_).row(i) += dx.row(i);
  }
  return loss;
}

std::vector<double> AutoregressiveLm::nll_loss(const Vector& params,
                                               const std::vector<TokenSequence>& batch) const {
  std::vector<double> losses;
  if (batch.empty()) return losses;
  int width = 0;
  for (const auto& s : batch) width = std::max(width, s.length());
  for (const auto& s : batch) {
    std::vector<TokenId> padded = s.ids;
    padded.resize(width, kPadId);
    Forward f;
    run(params, padded, f, false);
    const Matrix logp = nn::log_softmax_rows(f.logits);
    const int first = first_scored_target(s);
    double loss = 0.0;
    int count = 0;
    // Padding is positional; a pad id inside the sequence still scores.
    for (int target = first; target < s.length(); ++target) {
      loss -= logp(target - 1, padded[target]);
      ++count;
    }
    loss = count > 0 ? loss / count : 0.0;
    if (!std::isfinite(loss)) throw NumericError("non-finite sequence loss");
    losses.push_back(loss);
  }
  return losses;
}

std::vector<double> AutoregressiveLm::token_log_probs(const Vector& params,
                                                      const std::vector<TokenId>& ids) const {
  const Matrix logp = nn::log_softmax_rows(logits(params, ids));
  std::vector<double> out;
  for (std::size_t i = 1; i < ids.size(); ++i) out.push_back(logp(i - 1, ids[i]));
  return out;
}

std::vector<TokenId> AutoregressiveLm::sample(const Vector& params,
                                              std::vector<TokenId> prefix,
                                              const SamplingOptions& options,
                                              Rng& rng) const {
  if (!(options.temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (options.top_k < 1 || options.top_k > config_.vocab_size) {
    throw std::invalid_argument("top_k must lie in [1, vocab_size]");
  }
  if (prefix.empty()) throw std::invalid_argument("empty prompt");
  std::vector<TokenId> out;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<int> order(config_.vocab_size);
  for (int step = 0; step < options.max_new_tokens; ++step) {
    if (static_cast<int>(prefix.size()) >= config_.max_sequence_length) break;
    const Matrix all = logits(params, prefix);
    Eigen::RowVectorXd row = all.row(all.rows() - 1) / options.temperature;
    row(kPadId) = -std::numeric_limits<double>::infinity();

    std::iota(order.begin(), order.end(), 0);
    const int k = std::min(options.top_k, config_.vocab_size - 1);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](int a, int b) { return row(a) > row(b) || (row(a) == row(b) && a < b); });
    TokenId next = order[0];
    if (k > 1) {
      const double m = row(order[0]);
      std::vector<double> weights(k);
      double total = 0.0;
      for (int i = 0; i < k; ++i) total += weights[i] = std::exp(row(order[i]) - m);
      double u = uniform(rng) * total;
      for (int i = 0; i < k; ++i) {
        next = order[i];
        u -= weights[i];
        if (u <= 0.0) break;
      }
    }
    if (next == kEosId) break;
    out.push_back(next);
    prefix.push_back(next);
  }
  return out;
}

std::string generate(const AutoregressiveLm& model, const Vector& params,
                     const Vocabulary& vocab, const std::string& instruction,
                     const SamplingOptions& options, Rng& rng) {
  if (options.max_new_tokens <= 0) return {};
  std::vector<TokenId> prefix = vocab.tokenize(instruction);
  prefix.push_back(kSepId);
  return vocab.detokenize(model.sample(params, std::move(prefix), options, rng));
}

}  // namespace dpsyn::models
