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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dpsyn/dpsgd/engine.hpp"
#include "dpsyn/dpsgd/mechanism.hpp"
#include "dpsyn/models/autoregressive.hpp"

namespace dpsyn::dpsgd {
namespace {

using Gradient = PerExampleGradient<double>;

// 0.5 (w . x_i - y_i)^2 with an optional frozen coordinate mask.
class LeastSquares : public PerExampleObjective {
 public:
  LeastSquares(int n, int dim, unsigned seed) : xs_(n, dim), ys_(n) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < dim; ++j) xs_(i, j) = normal(rng);
      ys_(i) = normal(rng);
    }
    mask_ = Eigen::VectorXd::Ones(dim);
  }
  void freeze(int coordinate) { mask_(coordinate) = 0.0; }

  std::size_t num_examples() const override { return ys_.size(); }
  Eigen::Index num_parameters() const override { return xs_.cols(); }
  double loss(std::size_t i, const Eigen::VectorXd& w, std::uint64_t,
              Eigen::VectorXd* grad) const override {
    const double r = xs_.row(i).dot(w) - ys_(i);
    if (grad != nullptr) *grad = r * xs_.row(i).transpose();
    return 0.5 * r * r;
  }
  Eigen::VectorXd private_trainable_mask() const override { return mask_; }

 private:
  Eigen::MatrixXd xs_;
  Eigen::VectorXd ys_;
  Eigen::VectorXd mask_;
};

// Zero loss everywhere; isolates the injected noise.
class Flat : public PerExampleObjective {
 public:
  explicit Flat(int dim) : dim_(dim) {}
  std::size_t num_examples() const override { return 4; }
  Eigen::Index num_parameters() const override { return dim_; }
  double loss(std::size_t, const Eigen::VectorXd&, std::uint64_t,
              Eigen::VectorXd* grad) const override {
    if (grad != nullptr) grad->setZero(dim_);
    return 0.0;
  }

 private:
  int dim_;
};

TEST(PoissonLotTest, DegenerateRates) {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    EXPECT_TRUE(poisson_lot(100, 0.0, rng).indices.empty());
    const auto full = poisson_lot(100, 1.0, rng);
    ASSERT_EQ(full.indices.size(), 100u);
    EXPECT_EQ(full.indices.back(), 99u);
  }
  EXPECT_THROW(poisson_lot(10, 1.5, rng), DomainError);
}

TEST(PoissonLotTest, MeanLotSizeConcentrates) {
  Rng rng(7);
  const int draws = 10000;
  const double n = 1000, q = 0.05;
  double total = 0.0;
  for (int i = 0; i < draws; ++i) total += poisson_lot(1000, q, rng).indices.size();
  const double bound = 3.0 * std::sqrt(n * q * (1 - q) / draws);
  EXPECT_NEAR(total / draws, 50.0, bound);
}

TEST(PoissonLotTest, DeterministicGivenSeed) {
  Rng a(42), b(42);
  EXPECT_EQ(poisson_lot(500, 0.1, a).indices, poisson_lot(500, 0.1, b).indices);
}

TEST(ClipGradientTest, Examples) {
  Eigen::VectorXd g(2);
  g << 6.0, 8.0;
  const auto c = clip_gradient(Gradient(g), 1.0);
  EXPECT_NEAR(c.l2_norm(), 1.0, 1e-15);
  EXPECT_TRUE(c.values().isApprox(g * 0.1));

  Eigen::VectorXd small(2);
  small << 0.3, 0.4;
  EXPECT_EQ(clip_gradient(Gradient(small), 1.0).values(), small);
  EXPECT_EQ(clip_gradient(Gradient(Eigen::VectorXd::Zero(3)), 1.0).values(),
            Eigen::VectorXd::Zero(3));
  EXPECT_THROW(clip_gradient(Gradient(g), 0.0), DomainError);
}

TEST(ClipGradientTest, CachedNormMatches) {
  Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(50, -3, 7);
  EXPECT_NEAR(Gradient(g).l2_norm(), g.norm(), 1e-12);
}

TEST(ClipGradientTest, PropertiesOnRandomGradients) {
  std::mt19937 rng(3);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd g(17);
    for (auto& v : g) v = normal(rng) * scale(rng);
    const double c = 1.0;
    const auto once = clip_gradient(Gradient(g), c);
    EXPECT_LE(once.values().norm(), c + clip_tolerance(c));
    EXPECT_EQ(clip_gradient(once, c).values(), once.values());
    if (g.norm() >= c) {
      const double lambda = 1.0 + scale(rng);
      const auto scaled = clip_gradient(Gradient(lambda * g), c);
      EXPECT_TRUE(scaled.values().isApprox(once.values(), 1e-12));
    }
  }
}

TEST(PrivatizeLotTest, NoNoiseGivesClippedMean) {
  DpSgdConfig cfg;
  cfg.noise_multiplier = 0.0;
  cfg.expected_lot_size = 2.0;
  Eigen::VectorXd a(2), b(2);
  a << 0.2, 0.4;
  b << -0.6, 0.0;
  Rng rng(1);
  const auto out = privatize_lot<double>({Gradient(a), Gradient(b)}, cfg, 2, rng);
  EXPECT_TRUE(out.isApprox((a + b) / 2.0));
}

TEST(PrivatizeLotTest, RejectsUnclippedInput) {
  DpSgdConfig cfg;
  Eigen::VectorXd big = Eigen::VectorXd::Constant(4, 1.0);
  Rng rng(1);
  EXPECT_THROW(privatize_lot<double>({Gradient(big)}, cfg, 4, rng), ContractViolation);
}

TEST(PrivatizeLotTest, EmptyLotIsPureNoise) {
  DpSgdConfig cfg;
  cfg.noise_multiplier = 1.0;
  cfg.clip_norm = 1.0;
  cfg.expected_lot_size = 10.0;
  Rng rng(5);
  const auto out = privatize_lot<double>({}, cfg, 100000, rng);
  const double mean = out.mean();
  const double var = (out.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 3.0 * 0.1 / std::sqrt(1e5));
  EXPECT_NEAR(var, 0.01, 0.05 * 0.01);
}

TEST(PrivatizeLotTest, NoiseMomentsMatchTheMechanism) {
  DpSgdConfig cfg;
  cfg.noise_multiplier = 1.0;
  cfg.clip_norm = 1.0;
  cfg.expected_lot_size = 1.0;
  Rng rng(11);
  const int draws = 100000;
  double sum = 0.0, sq = 0.0;
  const std::vector<Gradient> zeros{Gradient(Eigen::VectorXd::Zero(1))};
  for (int i = 0; i < draws; ++i) {
    const double v = privatize_lot(zeros, cfg, 1, rng)(0);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / draws;
  EXPECT_NEAR(mean, 0.0, 3.0 / std::sqrt(static_cast<double>(draws)));
  EXPECT_NEAR(sq / draws - mean * mean, 1.0, 0.05);
}

TEST(DpSgdStepTest, ReducesToFullBatchGradientDescentBitForBit) {
  LeastSquares obj(20, 5, 1);
  DpSgdConfig cfg;
  cfg.noise_multiplier = 0.0;
  cfg.clip_norm = 1e9;
  cfg.sample_rate = 1.0;
  cfg.expected_lot_size = 20.0;
  TrainState state;
  state.parameters = Eigen::VectorXd::Zero(5);
  Eigen::VectorXd reference = state.parameters;
  Rng rng(3);
  for (int step = 0; step < 25; ++step) {
    const Lot lot = poisson_lot(20, 1.0, rng);
    state = dp_sgd_step(state, lot, obj, cfg, 0.05).state;

    Eigen::VectorXd sum = Eigen::VectorXd::Zero(5), g;
    for (std::size_t i = 0; i < 20; ++i) {
      obj.loss(i, reference, 0, &g);
      sum += g;
    }
    const Eigen::VectorXd mean = sum / 20.0;
    reference = reference - 0.05 * mean;
    ASSERT_EQ(state.parameters, reference) << "step " << step;
  }
  EXPECT_TRUE(state.accountant_curve.empty());
}

TEST(DpSgdStepTest, DeterministicForIdenticalSeeds) {
  LeastSquares obj(30, 4, 2);
  DpSgdConfig cfg = DpSgdConfig::for_dataset(30, 6, 1.0);
  cfg.noise_multiplier = 1.1;
  auto run = [&] {
    TrainState s;
    s.parameters = Eigen::VectorXd::Zero(4);
    s.rng_seed = 1234;
    for (int step = 0; step < 8; ++step) {
      Rng lot_rng = make_rng(1234, {stream::kLot, static_cast<std::uint64_t>(step)});
      s = dp_sgd_step(s, poisson_lot(30, cfg.sample_rate, lot_rng), obj, cfg, 0.1).state;
    }
    return s;
  };
  EXPECT_TRUE(run() == run());
}

TEST(DpSgdStepTest, FrozenCoordinatesNeverMove) {
  LeastSquares obj(30, 4, 2);
  obj.freeze(2);
  DpSgdConfig cfg = DpSgdConfig::for_dataset(30, 10, 1.0);
  cfg.noise_multiplier = 2.0;
  TrainState s;
  s.parameters = Eigen::VectorXd::Constant(4, 0.5);
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    s = dp_sgd_step(s, poisson_lot(30, cfg.sample_rate, rng), obj, cfg, 0.3).state;
  }
  EXPECT_EQ(s.parameters(2), 0.5);
  EXPECT_NE(s.parameters(0), 0.5);
}

TEST(DpSgdStepTest, AccountantTracksComposedSteps) {
  LeastSquares obj(50, 3, 4);
  DpSgdConfig cfg = DpSgdConfig::for_dataset(50, 5, 1.0);
  cfg.noise_multiplier = 0.9;
  const auto step_curve = privacy::rdp_curve(cfg.sample_rate, cfg.noise_multiplier);
  TrainState s;
  s.parameters = Eigen::VectorXd::Zero(3);
  Rng rng(9);
  double previous = 0.0;
  for (int t = 1; t <= 10; ++t) {
    s = dp_sgd_step(s, poisson_lot(50, cfg.sample_rate, rng), obj, cfg, 0.1).state;
    const double eps = privacy::to_epsilon_delta(s.accountant_curve, 1e-5).epsilon;
    EXPECT_DOUBLE_EQ(eps,
                     privacy::to_epsilon_delta(privacy::compose(step_curve, t), 1e-5).epsilon);
    EXPECT_GE(eps, previous);
    previous = eps;
  }
  EXPECT_EQ(s.step, 10);
}

TEST(DpSgdStepTest, EmptyLotStillTakesANoisyAccountedStep) {
  Flat obj(3);
  DpSgdConfig cfg;
  cfg.noise_multiplier = 1.0;
  cfg.sample_rate = 0.01;
  cfg.expected_lot_size = 1.0;
  TrainState s;
  s.parameters = Eigen::VectorXd::Zero(3);
  const auto r = dp_sgd_step(s, Lot{{}, 0.04}, obj, cfg, 1.0);
  EXPECT_EQ(r.lot_size, 0u);
  EXPECT_TRUE(std::isnan(r.mean_loss));
  EXPECT_EQ(r.state.step, 1);
  EXPECT_GT(r.state.parameters.norm(), 0.0);
  EXPECT_FALSE(r.state.accountant_curve.empty());
}

TEST(DpSgdStepTest, InjectedNoiseIsIndependentAcrossSteps) {
  Flat obj(1);
  DpSgdConfig cfg;
  cfg.noise_multiplier = 1.0;
  cfg.sample_rate = 0.5;
  cfg.expected_lot_size = 1.0;
  TrainState s;
  s.parameters = Eigen::VectorXd::Zero(1);
  s.rng_seed = 77;
  const int steps = 1000;
  std::vector<double> noise;
  for (int i = 0; i < steps; ++i) {
    const double before = s.parameters(0);
    s = dp_sgd_step(s, Lot{}, obj, cfg, 1.0).state;
    noise.push_back(before - s.parameters(0));
  }
  double mean = 0.0;
  for (double v : noise) mean += v;
  mean /= steps;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < steps; ++i) {
    den += (noise[i] - mean) * (noise[i] - mean);
    if (i + 1 < steps) num += (noise[i] - mean) * (noise[i + 1] - mean);
  }
  EXPECT_LT(std::abs(num / den), 3.0 / std::sqrt(static_cast<double>(steps)));
}

TEST(TrainTest, NonPrivateOverfitsSixteenExamples) {
  const auto vocab = models::Vocabulary::build({"a b c d e f g h"});
  models::ArConfig c;
  c.vocab_size = vocab.size();
  c.embedding_dim = 16;
  c.num_heads = 2;
  c.num_layers = 1;
  c.ff_dim = 32;
  c.max_sequence_length = 12;
  models::AutoregressiveLm model(c);
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> tok(models::kNumSpecialTokens, vocab.size() - 1);
  std::vector<models::TokenSequence> data;
  for (int i = 0; i < 16; ++i) {
    models::TokenSequence s;
    for (int j = 0; j < 8; ++j) s.ids.push_back(tok(rng));
    data.push_back(s);
  }
  models::ArObjective obj(model, data);
  DpSgdConfig cfg = DpSgdConfig::for_dataset(16, 16, 200.0);
  ASSERT_EQ(cfg.num_steps, 200);
  auto full_loss = [&](const Eigen::VectorXd& p) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) total += obj.loss(i, p, 0, nullptr);
    return total / data.size();
  };
  const Eigen::VectorXd init = model.initial_parameters(3);
  TrainOptions opts;
  opts.learning_rate = 0.5;
  const auto result = train(obj, init, cfg, privacy::PrivacyBudget::non_private(), opts);
  EXPECT_EQ(result.realized, privacy::PrivacyBudget::non_private());
  EXPECT_EQ(result.log.size(), 200u);
  EXPECT_LT(full_loss(result.state.parameters), full_loss(init));
  EXPECT_LT(result.log.back().loss, 0.5 * result.log.front().loss);
}

TEST(TrainTest, PrivateRunsMeetTheirBudgets) {
  LeastSquares obj(400, 6, 8);
  DpSgdConfig cfg = DpSgdConfig::for_dataset(400, 20, 3.0);
  const double delta = privacy::default_delta(400);
  TrainOptions opts;
  opts.seed = 3;
  const auto eight = train(obj, Eigen::VectorXd::Zero(6), cfg, {8.0, delta}, opts);
  const auto three = train(obj, Eigen::VectorXd::Zero(6), cfg, {3.0, delta}, opts);
  EXPECT_LE(eight.realized.epsilon, 8.0);
  EXPECT_GT(eight.realized.epsilon, 8.0 * 0.98);
  EXPECT_LE(three.realized.epsilon, 3.0);
  EXPECT_GT(three.config.noise_multiplier, eight.config.noise_multiplier);
  EXPECT_EQ(eight.state.step, cfg.num_steps);
  double prev = 0.0;
  for (const auto& entry : eight.log) {
    EXPECT_GE(entry.epsilon_so_far, prev);
    prev = entry.epsilon_so_far;
  }
  EXPECT_DOUBLE_EQ(eight.log.back().epsilon_so_far, eight.realized.epsilon);
}

TEST(TrainTest, UnsatisfiableBudgetPropagates) {
  LeastSquares obj(10, 2, 1);
  DpSgdConfig cfg = DpSgdConfig::for_dataset(10, 5, 100000.0);
  EXPECT_THROW(train(obj, Eigen::VectorXd::Zero(2), cfg, {1e-9, 1e-3}, {}),
               UnsatisfiableError);
}

TEST(DpSgdConfigTest, StepsFromEpochs) {
  const auto c = DpSgdConfig::for_dataset(1000, 64, 3.0);
  EXPECT_EQ(c.num_steps, 3 * 16);
  EXPECT_DOUBLE_EQ(c.sample_rate, 0.064);
  EXPECT_THROW(DpSgdConfig::for_dataset(10, 20, 1.0), DomainError);
}

TEST(CheckpointTest, RoundTripsExactly) {
  TrainState s;
  s.parameters = Eigen::VectorXd::LinSpaced(7, -1.0 / 3.0, 2.0 / 7.0);
  s.step = 12;
  s.rng_seed = 0xdeadbeefcafeULL;
  s.accountant_curve = privacy::compose(privacy::rdp_curve(0.01, 1.3), 12);
  const auto path = std::filesystem::temp_directory_path() / "dpsyn_ckpt_test.json";
  write_checkpoint(path, {"autoregressive", s, {{"dim", 3}}, {}});
  const auto back = read_checkpoint(path);
  EXPECT_EQ(back.model_kind, "autoregressive");
  EXPECT_TRUE(back.state == s);
  EXPECT_EQ(back.model["dim"], 3);
  std::filesystem::remove(path);
  EXPECT_THROW(read_checkpoint(path), IoError);
}

TEST(StepLogTest, JsonShape) {
  const auto j = to_json(StepLog{3, 0.25, privacy::kInfinity});
  EXPECT_EQ(j["step"], 3);
  EXPECT_EQ(j["loss"], 0.25);
  EXPECT_EQ(j["epsilon_so_far"], "inf");
  EXPECT_TRUE(to_json(StepLog{1, NAN, 2.0})["loss"].is_null());
}

}  // namespace
}  // namespace dpsyn::dpsgd
