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

// DP-SGD training loop with Renyi-DP bookkeeping. With epsilon = +inf the
// loop degrades to shuffled minibatch SGD without clipping or noise.

#ifndef DPSYN_DPSGD_ENGINE_HPP_
#define DPSYN_DPSGD_ENGINE_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dpsyn/dpsgd/mechanism.hpp"
#include "dpsyn/dpsgd/objective.hpp"
#include "dpsyn/privacy/accountant.hpp"
#include "json.hpp"

namespace dpsyn::dpsgd {

struct TrainState {
  Eigen::VectorXd parameters;
  std::int64_t step = 0;
  // compose(per-step curve, step); empty when training is not private.
  privacy::RdpCurve accountant_curve;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const TrainState& a, const TrainState& b);
};

struct StepResult {
  TrainState state;
  // Mean per-example loss over the lot before clipping; NaN for empty lots.
  double mean_loss;
  std::size_t lot_size;
};

// One private step: per-example gradients by single-example evaluation,
// frozen coordinates zeroed, flat clipping to C, Gaussian noise, update by
// -learning_rate * privatized, and one more composed accounting step.
StepResult dp_sgd_step(const TrainState& state, const Lot& lot,
                       const PerExampleObjective& objective, const DpSgdConfig& config,
                       double learning_rate);

struct StepLog {
  std::int64_t step;
  double loss;
  double epsilon_so_far;
};

struct TrainResult {
  TrainState state;
  privacy::PrivacyBudget realized;
  DpSgdConfig config;  // with the noise multiplier actually used
  std::vector<StepLog> log;
};

struct TrainOptions {
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  // Called after every step; may be empty.
  std::function<void(const StepLog&)> on_step;
};

// Finite epsilon: calibrates sigma for (q, num_steps, budget.delta) and runs
// num_steps private steps. Infinite epsilon: minibatch SGD over shuffled
// epochs with batch size round(L), returning the budget (inf, 0).
TrainResult train(const PerExampleObjective& objective, Eigen::VectorXd initial_parameters,
                  DpSgdConfig config, const privacy::PrivacyBudget& budget,
                  const TrainOptions& options);

// {"step", "loss", "epsilon_so_far"} with "inf" for non-private runs.
nlohmann::json to_json(const StepLog& entry);

// Model snapshot plus everything needed to resume or sample from it.
struct Checkpoint {
  std::string model_kind;
  TrainState state;
  nlohmann::json model;  // architecture, vocabulary, schedule, ...
  nlohmann::json extra;  // run provenance
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace dpsyn::dpsgd

#endif  // DPSYN_DPSGD_ENGINE_HPP_
