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

#include "dpsyn/models/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpsyn/errors.hpp"

namespace dpsyn::models {

using nn::Index;
using nn::Matrix;
using nn::Vector;

NoiseSchedule::NoiseSchedule(int num_steps, double offset)
    : num_steps_(num_steps), offset_(offset) {
  if (num_steps < 1) throw DomainError("noise schedule needs at least one step");
  if (!(offset > 0.0)) throw DomainError("noise schedule offset must be > 0");
  alpha_bar_.resize(num_steps + 1);
  for (int t = 0; t <= num_steps; ++t) {
    const double raw = 1.0 - std::sqrt(static_cast<double>(t) / num_steps + offset);
    alpha_bar_[t] = std::clamp(raw, kAlphaBarFloor, 1.0 - kAlphaBarFloor);
  }
}

double NoiseSchedule::alpha(int t) const {
  if (t < 1 || t > num_steps_) throw std::out_of_range("timestep outside [1, T]");
  return alpha_bar_[t] / alpha_bar_before(t);
}

NoiseSchedule::Posterior NoiseSchedule::posterior(int t) const {
  const double ab = alpha_bar(t);
  const double ab_prev = alpha_bar_before(t);
  const double b = beta(t);
  return {std::sqrt(ab_prev) * b / (1.0 - ab),
          std::sqrt(alpha(t)) * (1.0 - ab_prev) / (1.0 - ab),
          b * (1.0 - ab_prev) / (1.0 - ab)};
}

nlohmann::json NoiseSchedule::to_json() const {
  return {{"kind", "sqrt"}, {"num_steps", num_steps_}, {"offset", offset_}};
}

NoiseSchedule NoiseSchedule::from_json(const nlohmann::json& j) {
  if (j.value("kind", std::string("sqrt")) != "sqrt") {
    throw std::invalid_argument("unknown noise schedule kind");
  }
  return NoiseSchedule(j.at("num_steps").get<int>(), j.at("offset").get<double>());
}

NoiseSchedule sqrt_schedule(int num_steps, double offset) {
  return NoiseSchedule(num_steps, offset);
}

void DiffusionConfig::validate() const {
  if (vocab_size <= kNumSpecialTokens) {
    throw std::invalid_argument("DiffusionConfig: vocab_size must exceed the special tokens");
  }
  if (embedding_dim <= 0 || num_layers < 0 || num_heads <= 0 || ff_dim <= 0 ||
      max_sequence_length < 2 || diffusion_steps < 1) {
    throw std::invalid_argument("DiffusionConfig: sizes must be positive");
  }
  if (embedding_dim % num_heads != 0) {
    throw std::invalid_argument("DiffusionConfig: embedding_dim must be divisible by num_heads");
  }
  if (mse_weight < 0 || rounding_weight < 0 || prior_weight < 0) {
    throw std::invalid_argument("DiffusionConfig: loss weights must be >= 0");
  }
}

nlohmann::json DiffusionConfig::to_json() const {
  return {{"vocab_size", vocab_size},
          {"embedding_dim", embedding_dim},
          {"num_layers", num_layers},
          {"num_heads", num_heads},
          {"ff_dim", ff_dim},
          {"max_sequence_length", max_sequence_length},
          {"diffusion_steps", diffusion_steps},
          {"schedule_offset", schedule_offset},
          {"self_conditioning", self_conditioning},
          {"mse_weight", mse_weight},
          {"rounding_weight", rounding_weight},
          {"prior_weight", prior_weight}};
}

DiffusionConfig DiffusionConfig::from_json(const nlohmann::json& j) {
  DiffusionConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.max_sequence_length = j.value("max_sequence_length", c.max_sequence_length);
  c.diffusion_steps = j.value("diffusion_steps", c.diffusion_steps);
  c.schedule_offset = j.value("schedule_offset", c.schedule_offset);
  c.self_conditioning = j.value("self_conditioning", c.self_conditioning);
  c.mse_weight = j.value("mse_weight", c.mse_weight);
  c.rounding_weight = j.value("rounding_weight", c.rounding_weight);
  c.prior_weight = j.value("prior_weight", c.prior_weight);
  return c;
}

int DiffusionExample::num_targets() const {
  return static_cast<int>(std::count(target_mask.begin(), target_mask.end(), char{1}));
}

DiffusionExample encode_seq2seq(const Vocabulary& vocab, const std::string& instruction,
                                const std::string& text, int length) {
  const TokenSequence seq = encode(vocab, instruction, text, length);
  if (seq.instruction_length >= length) {
    throw std::length_error("instruction leaves no target positions");
  }
  DiffusionExample ex;
  ex.ids = seq.ids;
  ex.ids.resize(length, kPadId);
  ex.target_mask.assign(length, 0);
  for (int i = seq.instruction_length; i < length; ++i) ex.target_mask[i] = 1;
  return ex;
}

std::string decode_target(const Vocabulary& vocab, const DiffusionExample& example,
                          const std::vector<TokenId>& ids) {
  std::vector<TokenId> text;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!example.target_mask.at(i)) continue;
    if (ids[i] == kEosId) break;
    text.push_back(ids[i]);
  }
  return vocab.detokenize(text);
}

LossTerms loss_terms(const Matrix& predicted, const Matrix& embedding,
                     const DiffusionExample& example, double alpha_bar_last) {
  LossTerms terms;
  for (int i = 0; i < example.length(); ++i) {
    if (!example.target_mask[i]) continue;
    const TokenId w = example.ids[i];
    const auto z0 = embedding.row(w);
    terms.squared_error += (predicted.row(i) - z0).squaredNorm();
    const Vector logits = -(embedding.rowwise() - z0).rowwise().squaredNorm();
    const double m = logits.maxCoeff();
    terms.rounding += m + std::log((logits.array() - m).exp().sum()) - logits(w);
    terms.prior += alpha_bar_last * z0.squaredNorm();
    ++terms.count;
  }
  return terms;
}

std::vector<TokenId> reverse_sample(const Denoiser& denoiser, const Matrix& embedding,
                                    const DiffusionExample& condition,
                                    const NoiseSchedule& schedule, Rng& rng,
                                    const ReverseOptions& options) {
  const Index n = condition.length();
  const Index d = embedding.cols();
  std::normal_distribution<double> normal;
  Matrix z(n, d);
  for (Index i = 0; i < n; ++i) {
    if (condition.target_mask[i]) {
      for (Index j = 0; j < d; ++j) z(i, j) = normal(rng);
    } else {
      z.row(i) = embedding.row(condition.ids[i]);
    }
  }
  Matrix previous = Matrix::Zero(n, d);
  for (int t = schedule.num_steps(); t >= 1; --t) {
    Matrix estimate = denoiser(z, t, options.self_conditioning ? previous : Matrix());
    if (estimate.rows() != n || estimate.cols() != d) {
      throw ContractViolation("denoiser returned the wrong shape");
    }
    if (options.clamp) {
      for (Index i = 0; i < n; ++i) {
        if (condition.target_mask[i]) {
          estimate.row(i) = embedding.row(nearest_token(estimate.row(i), embedding));
        }
      }
    }
    const auto post = schedule.posterior(t);
    const double spread = t > 1 ? std::sqrt(post.variance) : 0.0;
    for (Index i = 0; i < n; ++i) {
      if (!condition.target_mask[i]) continue;
      z.row(i) = post.c1 * estimate.row(i) + post.c2 * z.row(i);
      if (spread > 0.0) {
        for (Index j = 0; j < d; ++j) z(i, j) += spread * normal(rng);
      }
    }
    previous = std::move(estimate);
  }
  std::vector<TokenId> ids = condition.ids;
  for (Index i = 0; i < n; ++i) {
    if (condition.target_mask[i]) ids[i] = nearest_token(z.row(i), embedding);
  }
  return ids;
}

DiffusionLm::DiffusionLm(DiffusionConfig config)
    : config_(config), schedule_(config.diffusion_steps, config.schedule_offset) {
  config_.validate();
  const Index d = config_.embedding_dim;
  embedding_ = layout_.add("emb", config_.vocab_size, d);
  position_ = layout_.add("pos_emb", config_.max_sequence_length, d, /*positional=*/true);
  segment_ = layout_.add("seg_emb", 2, d);
  time_w1_ = layout_.add("time.w1", d, d);
  time_b1_ = layout_.add("time.b1", d, 1);
  time_w2_ = layout_.add("time.w2", d, d);
  time_b2_ = layout_.add("time.b2", d, 1);
  nn::TransformerConfig tc;
  tc.d_model = config_.embedding_dim;
  tc.num_heads = config_.num_heads;
  tc.num_layers = config_.num_layers;
  tc.d_ff = config_.ff_dim;
  tc.causal = false;
  stack_ = nn::TransformerStack(layout_, tc, "denoiser");
  output_weight_ = layout_.add("out.weight", d, d);
  output_bias_ = layout_.add("out.bias", d, 1);
  // Last, so a model without self-conditioning shares the prefix layout.
  if (config_.self_conditioning) self_condition_ = layout_.add("self_cond.weight", d, d);
}

Vector DiffusionLm::initial_parameters(std::uint64_t seed) const {
  Vector params = Vector::Zero(layout_.size());
  Rng rng = make_rng(seed, {stream::kInit});
  const double scale = 1.0 / std::sqrt(static_cast<double>(config_.embedding_dim));
  nn::fill_normal(layout_.view(params, embedding_), 1.0, rng);
  nn::fill_normal(layout_.view(params, position_), 0.5, rng);
  nn::fill_normal(layout_.view(params, segment_), 0.5, rng);
  nn::fill_normal(layout_.view(params, time_w1_), scale, rng);
  nn::fill_normal(layout_.view(params, time_w2_), scale, rng);
  stack_.initialize(layout_, params, rng);
  nn::fill_normal(layout_.view(params, output_weight_), scale, rng);
  if (self_condition_ >= 0) nn::fill_normal(layout_.view(params, self_condition_), scale, rng);
  return params;
}

Matrix DiffusionLm::embedding(const Vector& params) const {
  return layout_.view(params, embedding_);
}

Matrix DiffusionLm::embed(const Vector& params, const std::vector<TokenId>& ids) const {
  const auto table = layout_.view(params, embedding_);
  Matrix z(static_cast<Index>(ids.size()), config_.embedding_dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= config_.vocab_size) {
      throw std::out_of_range("token id out of range");
    }
    z.row(i) = table.row(ids[i]);
  }
  return z;
}

void DiffusionLm::run(const Vector& params, const Matrix& z_t, const TargetMask& mask, int t,
                      const Matrix& previous, Forward& f, bool keep_cache) const {
  const Index n = z_t.rows();
  if (n < 1 || n > config_.max_sequence_length) {
    throw std::invalid_argument("canvas length outside [1, max_sequence_length]");
  }
  if (static_cast<Index>(mask.size()) != n) throw std::invalid_argument("mask length mismatch");
  if (t < 1 || t > schedule_.num_steps()) throw std::out_of_range("timestep outside [1, T]");

  Matrix x = z_t + layout_.view(params, position_).topRows(n);
  const auto seg = layout_.view(params, segment_);
  for (Index i = 0; i < n; ++i) x.row(i) += seg.row(mask[i] ? 1 : 0);

  f.time_features = nn::sinusoidal_features(static_cast<double>(t), config_.embedding_dim);
  f.time_hidden_pre = layout_.view(params, time_w1_) * f.time_features +
                      layout_.view(params, time_b1_).col(0);
  f.time_hidden = f.time_hidden_pre.unaryExpr(&nn::gelu);
  const Vector time_embedding =
      layout_.view(params, time_w2_) * f.time_hidden + layout_.view(params, time_b2_).col(0);
  x.rowwise() += time_embedding.transpose();

  f.previous.resize(0, 0);
  if (self_condition_ >= 0 && previous.size() > 0) {
    f.previous = previous;
    for (Index i = 0; i < n; ++i) {
      if (!mask[i]) f.previous.row(i).setZero();
    }
    x.noalias() += f.previous * layout_.view(params, self_condition_).transpose();
  }

  f.hidden = stack_.forward(layout_, params, x, keep_cache ? &f.stack : nullptr);
  f.output = nn::linear_forward(f.hidden, layout_.view(params, output_weight_),
                                layout_.view(params, output_bias_));
}

Matrix DiffusionLm::denoise(const Vector& params, const Matrix& z_t, const TargetMask& mask,
                            int t, const Matrix& previous) const {
  Forward f;
  run(params, z_t, mask, t, previous, f, false);
  return f.output;
}

Denoiser DiffusionLm::denoiser(const Vector& params, const TargetMask& mask) const {
  return [this, params, mask](const Matrix& z_t, int t, const Matrix& previous) {
    return denoise(params, z_t, mask, t, previous);
  };
}

NoiseDraw DiffusionLm::draw_noise(const DiffusionExample& example, std::uint64_t seed) const {
  Rng rng(seed);
  NoiseDraw draw;
  draw.t = std::uniform_int_distribution<int>(1, schedule_.num_steps())(rng);
  draw.noise.resize(example.length(), config_.embedding_dim);
  std::normal_distribution<double> normal;
  for (Index i = 0; i < draw.noise.rows(); ++i) {
    for (Index j = 0; j < draw.noise.cols(); ++j) draw.noise(i, j) = normal(rng);
  }
  draw.self_condition =
      config_.self_conditioning && std::bernoulli_distribution(0.5)(rng);
  return draw;
}

double DiffusionLm::example_loss(const Vector& params, const DiffusionExample& example,
                                 const NoiseDraw& draw, Vector* grad) const {
  if (grad != nullptr) grad->setZero(layout_.size());
  const int n = example.length();
  if (static_cast<int>(example.target_mask.size()) != n) {
    throw std::invalid_argument("mask length mismatch");
  }
  const int count = example.num_targets();
  if (count == 0) return 0.0;

  const Matrix table = embedding(params);
  const Matrix z0 = embed(params, example.ids);
  const double ab = schedule_.alpha_bar(draw.t);
  const Matrix z_t = noise_with(z0, ab, example.target_mask, draw.noise);
  Matrix previous;
  if (self_condition_ >= 0 && draw.self_condition) {
    previous = denoise(params, z_t, example.target_mask, draw.t, Matrix());
  }
  Forward f;
  run(params, z_t, example.target_mask, draw.t, previous, f, grad != nullptr);

  const double ab_last = schedule_.alpha_bar(schedule_.num_steps());
  const LossTerms terms = loss_terms(f.output, table, example, ab_last);
  const double loss = (config_.mse_weight * terms.squared_error +
                       config_.rounding_weight * terms.rounding +
                       config_.prior_weight * terms.prior) /
                      count;
  if (!std::isfinite(loss)) throw NumericError("non-finite diffusion loss");
  if (grad == nullptr) return loss;

  const double inv = 1.0 / count;
  Matrix d_output = Matrix::Zero(n, config_.embedding_dim);
  Matrix d_z0 = Matrix::Zero(n, config_.embedding_dim);
  auto d_table = layout_.view(*grad, embedding_);
  for (int i = 0; i < n; ++i) {
    if (!example.target_mask[i]) continue;
    const Eigen::RowVectorXd diff = f.output.row(i) - z0.row(i);
    d_output.row(i) = 2.0 * config_.mse_weight * inv * diff;
    d_z0.row(i) = -2.0 * config_.mse_weight * inv * diff +
                  2.0 * config_.prior_weight * ab_last * inv * z0.row(i);
    if (config_.rounding_weight > 0.0) {
      const Matrix offsets = (-table).rowwise() + z0.row(i);  // z0 - E_v
      Vector logits = -offsets.rowwise().squaredNorm();
      const double m = logits.maxCoeff();
      Vector p = (logits.array() - m).exp();
      p /= p.sum();
      p(example.ids[i]) -= 1.0;
      p *= config_.rounding_weight * inv;
      d_z0.row(i) -= 2.0 * (p.transpose() * offsets);
      d_table.noalias() += 2.0 * p.asDiagonal() * offsets;
    }
  }

  const Matrix d_hidden =
      nn::linear_backward(d_output, f.hidden, layout_.view(params, output_weight_),
                          layout_.view(*grad, output_weight_),
                          layout_.view(*grad, output_bias_));
  const Matrix dx = stack_.backward(layout_, params, f.stack, d_hidden, *grad);

  layout_.view(*grad, position_).topRows(n) += dx;
  auto d_seg = layout_.view(*grad, segment_);
  for (int i = 0; i < n; ++i) d_seg.row(example.target_mask[i] ? 1 : 0) += dx.row(i);

  const Vector d_time = dx.colwise().sum().transpose();
  layout_.view(*grad, time_w2_).noalias() += d_time * f.time_hidden.transpose();
  layout_.view(*grad, time_b2_).col(0) += d_time;
  const Vector d_hidden_time =
      (layout_.view(params, time_w2_).transpose() * d_time).cwiseProduct(
          f.time_hidden_pre.unaryExpr(&nn::gelu_grad));
  layout_.view(*grad, time_w1_).noalias() += d_hidden_time * f.time_features.transpose();
  layout_.view(*grad, time_b1_).col(0) += d_hidden_time;

  if (self_condition_ >= 0 && f.previous.size() > 0) {
    layout_.view(*grad, self_condition_).noalias() += dx.transpose() * f.previous;
  }

  const double keep = std::sqrt(ab);
  for (int i = 0; i < n; ++i) {
    d_z0.row(i) += example.target_mask[i] ? Eigen::RowVectorXd(keep * dx.row(i))
                                          : Eigen::RowVectorXd(dx.row(i));
    d_table.row(example.ids[i]) += d_z0.row(i);
  }
  return loss;
}

std::vector<double> DiffusionLm::diffusion_loss(const Vector& params,
                                                const std::vector<DiffusionExample>& batch,
                                                const std::vector<NoiseDraw>& draws) const {
  if (batch.size() != draws.size()) throw std::invalid_argument("one noise draw per example");
  std::vector<double> losses;
  losses.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    losses.push_back(example_loss(params, batch[i], draws[i], nullptr));
  }
  return losses;
}

std::vector<TokenId> DiffusionLm::sample(const Vector& params,
                                         const DiffusionExample& condition, Rng& rng,
                                         bool clamp) const {
  return reverse_sample(denoiser(params, condition.target_mask), embedding(params), condition,
                        schedule_, rng, {clamp, config_.self_conditioning});
}

std::string generate(const DiffusionLm& model, const Vector& params, const Vocabulary& vocab,
                     const std::string& instruction, Rng& rng, bool clamp) {
  const DiffusionExample canvas =
      encode_seq2seq(vocab, instruction, "", model.config().max_sequence_length);
  return decode_target(vocab, canvas, model.sample(params, canvas, rng, clamp));
}

TargetMask span_mask(int length, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw DomainError("span fraction must lie in [0, 1]");
  }
  TargetMask mask(length, 0);
  const int k = std::clamp(static_cast<int>(std::lround(fraction * length)), 0, length);
  if (k == 0) return mask;
  const int start = std::uniform_int_distribution<int>(0, length - k)(rng);
  std::fill(mask.begin() + start, mask.begin() + start + k, char{1});
  return mask;
}

double DiffusionObjective::loss(std::size_t index, const Eigen::VectorXd& params,
                                std::uint64_t example_seed, Eigen::VectorXd* grad) const {
  const DiffusionExample& stored = data_.at(index);
  if (span_fraction_ < 0.0) {
    return model_.example_loss(params, stored, model_.draw_noise(stored, example_seed), grad);
  }
  DiffusionExample ex = stored;
  Rng span_rng(derive_seed(example_seed, {1}));
  ex.target_mask = span_mask(ex.length(), span_fraction_, span_rng);
  return model_.example_loss(params, ex,
                             model_.draw_noise(ex, derive_seed(example_seed, {2})), grad);
}

dpsgd::Checkpoint span_pretrain(const DiffusionLm& model, const TokenCorpus& corpus,
                                const PretrainOptions& options) {
  if (corpus.is_private) {
    throw PrivateDataError("span pretraining refuses a corpus flagged as private");
  }
  if (corpus.sequences.empty()) throw DomainError("span pretraining needs a non-empty corpus");
  if (!(options.span_fraction >= 0.0 && options.span_fraction <= 1.0)) {
    throw DomainError("span fraction must lie in [0, 1]");
  }
  const int length = model.config().max_sequence_length;
  std::vector<DiffusionExample> data;
  data.reserve(corpus.sequences.size());
  for (const auto& seq : corpus.sequences) {
    DiffusionExample ex;
    ex.ids = seq;
    ex.ids.resize(length, kPadId);
    ex.target_mask.assign(length, 0);
    data.push_back(std::move(ex));
  }
  const DiffusionObjective objective(model, std::move(data), options.span_fraction);

  const double n = static_cast<double>(objective.num_examples());
  dpsgd::DpSgdConfig config;
  config.expected_lot_size = std::clamp(options.batch_size, 1.0, n);
  config.sample_rate = config.expected_lot_size / n;
  config.num_steps = options.steps;
  dpsgd::TrainOptions train_options;
  train_options.learning_rate = options.learning_rate;
  train_options.seed = derive_seed(options.seed, {stream::kPretrain});
  const auto result =
      dpsgd::train(objective, model.initial_parameters(train_options.seed), config,
                   privacy::PrivacyBudget::non_private(), train_options);

  dpsgd::Checkpoint checkpoint;
  checkpoint.model_kind = "diffusion";
  checkpoint.state = result.state;
  checkpoint.model = {{"config", model.config().to_json()},
                      {"schedule", model.schedule().to_json()}};
  checkpoint.extra = {{"pretraining",
                       {{"objective", "span_denoising"},
                        {"span_fraction", options.span_fraction},
                        {"steps", options.steps},
                        {"batch_size", config.expected_lot_size},
                        {"learning_rate", options.learning_rate},
                        {"final_loss", result.log.empty() ? 0.0 : result.log.back().loss}}}};
  return checkpoint;
}

}  // namespace dpsyn::models
