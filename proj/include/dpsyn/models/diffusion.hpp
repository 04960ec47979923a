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

// Sequence-to-sequence text diffusion in embedding space. A fixed-length
// canvas holds condition positions (instruction and separator), which stay
// clean, and target positions, which are noised and denoised. The network
// predicts the clean embeddings z_0 directly.

#ifndef DPSYN_MODELS_DIFFUSION_HPP_
#define DPSYN_MODELS_DIFFUSION_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dpsyn/dpsgd/engine.hpp"
#include "dpsyn/dpsgd/objective.hpp"
#include "dpsyn/models/autoregressive.hpp"
#include "dpsyn/models/vocabulary.hpp"
#include "dpsyn/nn/parameters.hpp"
#include "dpsyn/nn/transformer.hpp"
#include "dpsyn/rng.hpp"
#include "json.hpp"

namespace dpsyn::models {

inline constexpr double kAlphaBarFloor = 1e-5;

// alpha_bar_t = clamp(1 - sqrt(t / T + s), 1e-5, 1 - 1e-5) for t = 0..T.
//
// Index 0 is the schedule's nominal start. The Markov chain treats z_0 as
// clean data, so the first transition uses alpha_1 = alpha_bar_1 and the
// closed form q(z_t | z_0) = N(sqrt(alpha_bar_t) z_0, (1 - alpha_bar_t) I)
// agrees with composing single steps.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  NoiseSchedule(int num_steps, double offset);

  int num_steps() const { return num_steps_; }
  double offset() const { return offset_; }
  double alpha_bar(int t) const { return alpha_bar_.at(t); }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

  // Single-step retention alpha_t and beta_t = 1 - alpha_t, t in [1, T].
  double alpha(int t) const;
  double beta(int t) const { return 1.0 - alpha(t); }

  // q(z_{t-1} | z_t, z_0) = N(c1 z_0 + c2 z_t, variance I).
  struct Posterior {
    double c1;
    double c2;
    double variance;
  };
  Posterior posterior(int t) const;

  nlohmann::json to_json() const;
  static NoiseSchedule from_json(const nlohmann::json& j);

 private:
  double alpha_bar_before(int t) const { return t == 1 ? 1.0 : alpha_bar_[t - 1]; }

  int num_steps_ = 0;
  double offset_ = 0.0;
  std::vector<double> alpha_bar_;
};

// Throws DomainError when num_steps < 1 or offset <= 0.
NoiseSchedule sqrt_schedule(int num_steps, double offset = 1e-4);

using TargetMask = std::vector<char>;

// sqrt(ab) z_0 + sqrt(1 - ab) noise at target rows; condition rows are
// copied bit-for-bit. Noise rows for condition positions are ignored.
template <typename Derived, typename NoiseDerived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> noise_with(
    const Eigen::MatrixBase<Derived>& z0, double alpha_bar, const TargetMask& mask,
    const Eigen::MatrixBase<NoiseDerived>& noise) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = z0;
  const Scalar keep = static_cast<Scalar>(std::sqrt(alpha_bar));
  const Scalar spread = static_cast<Scalar>(std::sqrt(1.0 - alpha_bar));
  for (Eigen::Index i = 0; i < z0.rows(); ++i) {
    if (mask.at(i)) out.row(i) = keep * z0.row(i) + spread * noise.row(i);
  }
  return out;
}

// Draws z_t ~ q(z_t | z_0) at target rows; row-major draws, target rows only.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> forward_noising(
    const Eigen::MatrixBase<Derived>& z0, int t, const NoiseSchedule& schedule,
    const TargetMask& mask, Rng& rng) {
  using Scalar = typename Derived::Scalar;
  if (t < 1 || t > schedule.num_steps()) {
    throw std::out_of_range("forward_noising: timestep outside [1, T]");
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> noise =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(z0.rows(), z0.cols());
  std::normal_distribution<Scalar> normal;
  for (Eigen::Index i = 0; i < z0.rows(); ++i) {
    if (!mask.at(i)) continue;
    for (Eigen::Index j = 0; j < z0.cols(); ++j) noise(i, j) = normal(rng);
  }
  return noise_with(z0, schedule.alpha_bar(t), mask, noise);
}

// One forward transition z_{t-1} -> z_t at target rows.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> forward_step(
    const Eigen::MatrixBase<Derived>& previous, int t, const NoiseSchedule& schedule,
    const TargetMask& mask, Rng& rng) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = previous;
  const Scalar keep = static_cast<Scalar>(std::sqrt(schedule.alpha(t)));
  const Scalar spread = static_cast<Scalar>(std::sqrt(schedule.beta(t)));
  std::normal_distribution<Scalar> normal;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (!mask.at(i)) continue;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out(i, j) = keep * previous(i, j) + spread * normal(rng);
    }
  }
  return out;
}

// Nearest embedding row by L2 distance; the lowest id wins ties.
template <typename Derived, typename EmbeddingDerived>
TokenId nearest_token(const Eigen::MatrixBase<Derived>& z,
                      const Eigen::MatrixBase<EmbeddingDerived>& embedding) {
  TokenId best = 0;
  auto best_distance = std::numeric_limits<typename Derived::Scalar>::infinity();
  for (Eigen::Index v = 0; v < embedding.rows(); ++v) {
    const auto d = (embedding.row(v) - z).squaredNorm();
    if (d < best_distance) {
      best_distance = d;
      best = static_cast<TokenId>(v);
    }
  }
  return best;
}

template <typename Derived, typename EmbeddingDerived>
std::vector<TokenId> round_to_tokens(const Eigen::MatrixBase<Derived>& z,
                                     const Eigen::MatrixBase<EmbeddingDerived>& embedding) {
  std::vector<TokenId> ids(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) ids[i] = nearest_token(z.row(i), embedding);
  return ids;
}

struct DiffusionConfig {
  int vocab_size = 0;
  int embedding_dim = 32;
  int num_layers = 2;
  int num_heads = 4;
  int ff_dim = 64;
  int max_sequence_length = 32;
  int diffusion_steps = 200;
  double schedule_offset = 1e-4;
  bool self_conditioning = false;
  // Loss term weights.
  double mse_weight = 1.0;
  double rounding_weight = 1.0;
  double prior_weight = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static DiffusionConfig from_json(const nlohmann::json& j);
};

// A token canvas and the positions that are diffused.
struct DiffusionExample {
  std::vector<TokenId> ids;
  TargetMask target_mask;

  int length() const { return static_cast<int>(ids.size()); }
  int num_targets() const;
};

// <instruction> <sep> as condition, <text> <eos> then padding as target,
// always exactly `length` positions.
DiffusionExample encode_seq2seq(const Vocabulary& vocab, const std::string& instruction,
                                const std::string& text, int length);

// Target tokens up to the first eos, detokenized.
std::string decode_target(const Vocabulary& vocab, const DiffusionExample& example,
                          const std::vector<TokenId>& ids);

// Per-example randomness of the training loss.
struct NoiseDraw {
  int t = 1;
  nn::Matrix noise;  // positions x embedding_dim
  // Two-pass training: feed a detached first-pass estimate back in.
  bool self_condition = false;
};

// The three loss terms summed over target positions.
struct LossTerms {
  double squared_error = 0.0;
  double rounding = 0.0;
  double prior = 0.0;
  int count = 0;
};

// -log softmax(-|z_0 - E_v|^2)[w] and friends for a given prediction.
LossTerms loss_terms(const nn::Matrix& predicted, const nn::Matrix& embedding,
                     const DiffusionExample& example, double alpha_bar_last);

// z_hat_0 for all positions from (z_t, t, previous estimate).
using Denoiser = std::function<nn::Matrix(const nn::Matrix& z_t, int t,
                                          const nn::Matrix& previous)>;

struct ReverseOptions {
  // Snap each z_hat_0 to its nearest embedding row before stepping.
  bool clamp = false;
  bool self_conditioning = false;
};

// Ancestral sampling from N(0, I) at target rows. Condition rows hold
// their embeddings throughout and keep their ids in the output.
std::vector<TokenId> reverse_sample(const Denoiser& denoiser, const nn::Matrix& embedding,
                                    const DiffusionExample& condition,
                                    const NoiseSchedule& schedule, Rng& rng,
                                    const ReverseOptions& options);

class DiffusionLm {
 public:
  explicit DiffusionLm(DiffusionConfig config);

  const DiffusionConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const nn::ParameterLayout& layout() const { return layout_; }
  nn::Index num_parameters() const { return layout_.size(); }

  nn::Vector initial_parameters(std::uint64_t seed) const;

  // The V x d table used both to embed and to round.
  nn::Matrix embedding(const nn::Vector& params) const;

  // Clean canvas: embedding rows of the example's ids.
  nn::Matrix embed(const nn::Vector& params, const std::vector<TokenId>& ids) const;

  // z_hat_0 for every position. `previous` is ignored without
  // self-conditioning and may be empty, meaning zeros.
  nn::Matrix denoise(const nn::Vector& params, const nn::Matrix& z_t,
                     const TargetMask& mask, int t, const nn::Matrix& previous) const;

  Denoiser denoiser(const nn::Vector& params, const TargetMask& mask) const;

  // Timestep uniform on [1, T], standard normal noise, and a fair coin for
  // self-conditioning when enabled; all from `seed`.
  NoiseDraw draw_noise(const DiffusionExample& example, std::uint64_t seed) const;

  // Weighted loss terms averaged over target positions; 0 with no targets.
  double example_loss(const nn::Vector& params, const DiffusionExample& example,
                      const NoiseDraw& draw, nn::Vector* grad) const;

  std::vector<double> diffusion_loss(const nn::Vector& params,
                                     const std::vector<DiffusionExample>& batch,
                                     const std::vector<NoiseDraw>& draws) const;

  std::vector<TokenId> sample(const nn::Vector& params, const DiffusionExample& condition,
                              Rng& rng, bool clamp) const;

 private:
  struct Forward {
    nn::Matrix previous;  // detached self-conditioning input
    nn::Vector time_features, time_hidden_pre, time_hidden;
    nn::TransformerStack::Cache stack;
    nn::Matrix hidden;
    nn::Matrix output;
  };
  void run(const nn::Vector& params, const nn::Matrix& z_t, const TargetMask& mask, int t,
           const nn::Matrix& previous, Forward& f, bool keep_cache) const;

  DiffusionConfig config_;
  NoiseSchedule schedule_;
  nn::ParameterLayout layout_;
  nn::TransformerStack stack_;
  int embedding_ = -1;
  int position_ = -1;
  int segment_ = -1;
  int time_w1_ = -1, time_b1_ = -1, time_w2_ = -1, time_b2_ = -1;
  int output_weight_ = -1, output_bias_ = -1;
  int self_condition_ = -1;
};

// Generated text for `instruction` on a canvas of max_sequence_length.
std::string generate(const DiffusionLm& model, const nn::Vector& params,
                     const Vocabulary& vocab, const std::string& instruction, Rng& rng,
                     bool clamp);

// Training examples for DP-SGD. With a span fraction set, each call draws a
// fresh contiguous target span instead of using the stored mask.
class DiffusionObjective : public dpsgd::PerExampleObjective {
 public:
  DiffusionObjective(const DiffusionLm& model, std::vector<DiffusionExample> data,
                     double span_fraction = -1.0)
      : model_(model), data_(std::move(data)), span_fraction_(span_fraction) {}

  std::size_t num_examples() const override { return data_.size(); }
  Eigen::Index num_parameters() const override { return model_.num_parameters(); }
  double loss(std::size_t index, const Eigen::VectorXd& params, std::uint64_t example_seed,
              Eigen::VectorXd* grad) const override;
  Eigen::VectorXd private_trainable_mask() const override {
    return model_.layout().private_trainable_mask();
  }

 private:
  const DiffusionLm& model_;
  std::vector<DiffusionExample> data_;
  double span_fraction_;
};

// Contiguous span of round(fraction * length) positions at a uniform start.
TargetMask span_mask(int length, double fraction, Rng& rng);

// Token sequences with their privacy status; unflagged corpora count as
// private.
struct TokenCorpus {
  std::vector<std::vector<TokenId>> sequences;
  bool is_private = true;
};

struct PretrainOptions {
  double span_fraction = 0.5;
  std::int64_t steps = 1000;
  double batch_size = 16;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

// Non-private span-denoising pretraining on a public corpus. Sequences are
// padded to max_sequence_length. Throws PrivateDataError on private input.
dpsgd::Checkpoint span_pretrain(const DiffusionLm& model, const TokenCorpus& corpus,
                                const PretrainOptions& options);

}  // namespace dpsyn::models

#endif  // DPSYN_MODELS_DIFFUSION_HPP_
