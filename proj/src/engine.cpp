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

#include "dpsyn/dpsgd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "dpsyn/errors.hpp"
#include "dpsyn/privacy/audit.hpp"

namespace dpsyn::dpsgd {

using privacy::kInfinity;

void DpSgdConfig::validate() const {
  if (!(clip_norm > 0.0)) throw DomainError("DpSgdConfig: clip_norm must be > 0");
  if (!(noise_multiplier >= 0.0)) {
    throw DomainError("DpSgdConfig: noise_multiplier must be >= 0");
  }
  if (!(sample_rate >= 0.0 && sample_rate <= 1.0)) {
    throw DomainError("DpSgdConfig: sample_rate must lie in [0, 1]");
  }
  if (num_steps < 1) throw DomainError("DpSgdConfig: num_steps must be >= 1");
  if (!(expected_lot_size > 0.0)) {
    throw DomainError("DpSgdConfig: expected_lot_size must be > 0");
  }
}

DpSgdConfig DpSgdConfig::for_dataset(std::size_t dataset_size, double expected_lot_size,
                                     double epochs, double clip_norm) {
  if (dataset_size == 0) throw DomainError("DpSgdConfig: empty dataset");
  if (!(expected_lot_size > 0.0) || expected_lot_size > static_cast<double>(dataset_size)) {
    throw DomainError("DpSgdConfig: expected lot size must lie in (0, N]");
  }
  if (!(epochs > 0.0)) throw DomainError("DpSgdConfig: epochs must be > 0");
  DpSgdConfig c;
  c.clip_norm = clip_norm;
  c.expected_lot_size = expected_lot_size;
  c.sample_rate = expected_lot_size / static_cast<double>(dataset_size);
  const double steps_per_epoch =
      std::ceil(static_cast<double>(dataset_size) / expected_lot_size);
  c.num_steps = std::max<std::int64_t>(1, std::llround(epochs * steps_per_epoch));
  c.validate();
  return c;
}

nlohmann::json DpSgdConfig::to_json() const {
  return {{"clip_norm", clip_norm},
          {"noise_multiplier", noise_multiplier},
          {"sample_rate", sample_rate},
          {"num_steps", num_steps},
          {"expected_lot_size", expected_lot_size}};
}

Lot poisson_lot(std::size_t dataset_size, double sample_rate, Rng& rng) {
  if (!(sample_rate >= 0.0 && sample_rate <= 1.0)) {
    throw DomainError("poisson_lot: sample rate must lie in [0, 1]");
  }
  Lot lot;
  lot.expected_size = sample_rate * static_cast<double>(dataset_size);
  if (sample_rate == 0.0) return lot;
  if (sample_rate == 1.0) {
    lot.indices.resize(dataset_size);
    std::iota(lot.indices.begin(), lot.indices.end(), std::size_t{0});
    return lot;
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (std::size_t i = 0; i < dataset_size; ++i) {
    if (uniform(rng) < sample_rate) lot.indices.push_back(i);
  }
  return lot;
}

bool operator==(const TrainState& a, const TrainState& b) {
  return a.step == b.step && a.rng_seed == b.rng_seed &&
         a.parameters.size() == b.parameters.size() && a.parameters == b.parameters &&
         a.accountant_curve.orders() == b.accountant_curve.orders() &&
         a.accountant_curve.values() == b.accountant_curve.values();
}

namespace {

StepResult step_with_curve(const TrainState& state, const Lot& lot,
                           const PerExampleObjective& objective, const DpSgdConfig& config,
                           double learning_rate, const privacy::RdpCurve& step_curve) {
  const Eigen::Index dim = objective.num_parameters();
  if (state.parameters.size() != dim) {
    throw ContractViolation("dp_sgd_step: parameter vector has the wrong size");
  }
  const Eigen::VectorXd mask = objective.private_trainable_mask();

  std::vector<PerExampleGradient<double>> clipped;
  clipped.reserve(lot.indices.size());
  double loss_sum = 0.0;
  Eigen::VectorXd grad(dim);
  for (std::size_t index : lot.indices) {
    const std::uint64_t example_seed = derive_seed(
        state.rng_seed, {stream::kExample, static_cast<std::uint64_t>(state.step), index});
    loss_sum += objective.loss(index, state.parameters, example_seed, &grad);
    // Frozen coordinates carry no per-example gradient.
    grad.array() *= mask.array();
    clipped.push_back(clip_gradient(PerExampleGradient<double>(grad), config.clip_norm));
  }
  Rng noise_rng =
      make_rng(state.rng_seed, {stream::kNoise, static_cast<std::uint64_t>(state.step)});
  const Eigen::VectorXd update = privatize_lot(clipped, config, dim, noise_rng);

  StepResult result;
  result.state.parameters = state.parameters - learning_rate * (mask.array() * update.array()).matrix();
  result.state.step = state.step + 1;
  result.state.rng_seed = state.rng_seed;
  if (!step_curve.empty()) {
    result.state.accountant_curve = privacy::compose(step_curve, result.state.step);
  }
  result.lot_size = lot.indices.size();
  result.mean_loss = lot.indices.empty() ? std::numeric_limits<double>::quiet_NaN()
                                         : loss_sum / static_cast<double>(lot.indices.size());
  return result;
}

privacy::RdpCurve step_curve_for(const DpSgdConfig& config) {
  if (config.noise_multiplier > 0.0) {
    return privacy::rdp_curve(config.sample_rate, config.noise_multiplier);
  }
  return {};
}

}  // namespace

StepResult dp_sgd_step(const TrainState& state, const Lot& lot,
                       const PerExampleObjective& objective, const DpSgdConfig& config,
                       double learning_rate) {
  config.validate();
  return step_with_curve(state, lot, objective, config, learning_rate,
                         step_curve_for(config));
}

namespace {

TrainResult train_private(const PerExampleObjective& objective,
                          Eigen::VectorXd initial_parameters, DpSgdConfig config,
                          const privacy::PrivacyBudget& budget, const TrainOptions& options) {
  config.noise_multiplier =
      privacy::calibrate_noise(budget, config.sample_rate, config.num_steps);
  config.validate();
  const privacy::RdpCurve step_curve = step_curve_for(config);

  TrainResult result;
  result.config = config;
  result.state.parameters = std::move(initial_parameters);
  result.state.rng_seed = options.seed;
  result.state.accountant_curve = privacy::RdpCurve::zeros(step_curve.orders());
  const std::size_t n = objective.num_examples();
  for (std::int64_t step = 0; step < config.num_steps; ++step) {
    Rng lot_rng = make_rng(options.seed, {stream::kLot, static_cast<std::uint64_t>(step)});
    const Lot lot = poisson_lot(n, config.sample_rate, lot_rng);
    StepResult r = step_with_curve(result.state, lot, objective, config,
                                   options.learning_rate, step_curve);
    result.state = std::move(r.state);
    const double eps =
        privacy::to_epsilon_delta(result.state.accountant_curve, budget.delta).epsilon;
    StepLog entry{result.state.step, r.mean_loss, eps};
    if (options.on_step) options.on_step(entry);
    result.log.push_back(entry);
  }
  result.realized = {
      privacy::to_epsilon_delta(result.state.accountant_curve, budget.delta).epsilon,
      budget.delta};
  return result;
}

TrainResult train_non_private(const PerExampleObjective& objective,
                              Eigen::VectorXd initial_parameters, DpSgdConfig config,
                              const TrainOptions& options) {
  config.noise_multiplier = 0.0;
  TrainResult result;
  result.config = config;
  result.state.parameters = std::move(initial_parameters);
  result.state.rng_seed = options.seed;
  result.realized = privacy::PrivacyBudget::non_private();

  const std::size_t n = objective.num_examples();
  const std::size_t batch =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(config.expected_lot_size)),
                              1, std::max<std::size_t>(n, 1));
  const Eigen::Index dim = objective.num_parameters();
  std::vector<std::size_t> order(n);
  std::size_t cursor = n;
  std::uint64_t epoch = 0;
  Eigen::VectorXd grad(dim), sum(dim);
  for (std::int64_t step = 0; step < config.num_steps; ++step) {
    sum.setZero();
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor >= n) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng = make_rng(options.seed, {stream::kShuffle, epoch++});
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        cursor = 0;
      }
      const std::size_t index = order[cursor++];
      const std::uint64_t example_seed = derive_seed(
          options.seed, {stream::kExample, static_cast<std::uint64_t>(step), index});
      loss_sum += objective.loss(index, result.state.parameters, example_seed, &grad);
      sum += grad;
    }
    result.state.parameters -= options.learning_rate * (sum / static_cast<double>(batch));
    result.state.step = step + 1;
    StepLog entry{result.state.step, loss_sum / static_cast<double>(batch), kInfinity};
    if (options.on_step) options.on_step(entry);
    result.log.push_back(entry);
  }
  return result;
}

}  // namespace

TrainResult train(const PerExampleObjective& objective, Eigen::VectorXd initial_parameters,
                  DpSgdConfig config, const privacy::PrivacyBudget& budget,
                  const TrainOptions& options) {
  budget.validate();
  config.validate();
  if (objective.num_examples() == 0) throw DomainError("train: empty training set");
  if (initial_parameters.size() != objective.num_parameters()) {
    throw ContractViolation("train: parameter vector has the wrong size");
  }
  if (budget.is_private()) {
    return train_private(objective, std::move(initial_parameters), config, budget, options);
  }
  return train_non_private(objective, std::move(initial_parameters), config, options);
}

nlohmann::json to_json(const StepLog& entry) {
  nlohmann::json loss = std::isfinite(entry.loss) ? nlohmann::json(entry.loss) : nlohmann::json();
  return {{"step", entry.step},
          {"loss", loss},
          {"epsilon_so_far", privacy::epsilon_to_json(entry.epsilon_so_far)}};
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto& s = checkpoint.state;
  nlohmann::json j;
  j["model_kind"] = checkpoint.model_kind;
  j["step"] = s.step;
  j["rng_seed"] = s.rng_seed;
  j["accountant"] = {{"orders", s.accountant_curve.orders()},
                     {"values", s.accountant_curve.values()}};
  j["parameters"] = std::vector<double>(s.parameters.data(),
                                        s.parameters.data() + s.parameters.size());
  j["model"] = checkpoint.model;
  j["extra"] = checkpoint.extra;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  Checkpoint c;
  c.model_kind = j.at("model_kind").get<std::string>();
  c.state.step = j.at("step").get<std::int64_t>();
  c.state.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.state.accountant_curve =
      privacy::RdpCurve(j.at("accountant").at("orders").get<std::vector<double>>(),
                        j.at("accountant").at("values").get<std::vector<double>>());
  const auto params = j.at("parameters").get<std::vector<double>>();
  c.state.parameters = Eigen::Map<const Eigen::VectorXd>(params.data(), params.size());
  c.model = j.value("model", nlohmann::json::object());
  c.extra = j.value("extra", nlohmann::json::object());
  return c;
}

}  // namespace dpsyn::dpsgd
