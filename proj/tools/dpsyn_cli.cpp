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

// dpsyn: run, sweep, audit and accountant subcommands.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dpsyn/data/records.hpp"
#include "dpsyn/errors.hpp"
#include "dpsyn/experiment/config.hpp"
#include "dpsyn/experiment/runner.hpp"
#include "dpsyn/privacy/accountant.hpp"
#include "dpsyn/privacy/audit.hpp"
#include "json.hpp"

namespace {

using namespace dpsyn;

double parse_epsilon(const std::string& s) {
  return privacy::epsilon_from_json(s == "inf" || s == "infinity" ? nlohmann::json(s)
                                                                  : nlohmann::json(std::stod(s)));
}

experiment::RunOptions run_options(bool overwrite) {
  experiment::RunOptions o;
  o.overwrite = overwrite;
  o.log = [](const std::string& line) { std::cerr << line << '\n'; };
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private synthetic text generation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, epsilon_override;
  std::optional<std::uint64_t> seed;
  bool overwrite = false;
  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", seed, "Run a single seed instead of the configured list");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--epsilon-override", epsilon_override, "Target epsilon (number or inf)");
  run->add_flag("--overwrite", overwrite, "Replace a non-empty output directory");

  std::string sweep_path, sweep_out;
  bool sweep_overwrite = false;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of experiments and write table.md");
  sweep->add_option("--config", sweep_path, "Sweep config (JSON)")->required();
  sweep->add_option("--out", sweep_out, "Output directory");
  sweep->add_flag("--overwrite", sweep_overwrite, "Replace non-empty cell directories");

  std::string data_path, audit_epsilon = "inf";
  double audit_delta = 0.0;
  std::optional<std::int64_t> k_bound;
  auto* audit = app.add_subcommand("audit", "Author-contribution audit and effective budget");
  audit->add_option("--data", data_path, "JSONL dataset")->required();
  audit->add_option("--epsilon", audit_epsilon, "Claimed epsilon (number or inf)")->required();
  audit->add_option("--delta", audit_delta, "Claimed delta")->required();
  audit->add_option("--k", k_bound, "Known bound on records per author")
      ->check(CLI::PositiveNumber);

  double sigma = 0.0, q = 0.0, acct_delta = 0.0;
  std::int64_t steps = 0;
  auto* accountant = app.add_subcommand("accountant", "Epsilon of a subsampled Gaussian run");
  accountant->add_option("--sigma", sigma, "Noise multiplier")->required();
  accountant->add_option("--q", q, "Sampling rate")->required();
  accountant->add_option("--steps", steps, "Number of steps")->required();
  accountant->add_option("--delta", acct_delta, "Target delta")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto config = experiment::load_config(config_path);
      if (seed) config.seeds = {*seed};
      if (!out_dir.empty()) config.output_dir = out_dir;
      if (!epsilon_override.empty()) config.training.epsilon = parse_epsilon(epsilon_override);
      const auto outcome = experiment::run_experiment(config, run_options(overwrite));
      const auto& r = outcome.report;
      std::cout << "run directory: " << outcome.directory.string() << '\n'
                << "macro-F1 " << r.macro_f1.mean << " (±" << r.macro_f1.std << "), accuracy "
                << r.accuracy.mean << " (±" << r.accuracy.std << ")";
      if (r.perplexity) std::cout << ", perplexity " << r.perplexity->mean;
      std::cout << '\n';
    } else if (*sweep) {
      auto spec = experiment::load_sweep(sweep_path);
      if (!sweep_out.empty()) {
        for (auto& cell : spec.cells) cell.output_dir = sweep_out / cell.output_dir.filename();
        spec.output_dir = sweep_out;
      }
      const auto result = experiment::sweep(spec, run_options(sweep_overwrite));
      std::cout << result.table;
      const bool any_failed = std::any_of(result.cells.begin(), result.cells.end(),
                                          [](const auto& c) { return !c.outcome; });
      return any_failed ? 3 : 0;
    } else if (*audit) {
      const auto data = data::load_jsonl(data_path);
      auto report = privacy::audit_author_contributions(data);
      if (k_bound) report.k_max = std::max(report.k_max, *k_bound);
      const privacy::PrivacyBudget claimed{parse_epsilon(audit_epsilon), audit_delta};
      claimed.validate();
      const auto effective = privacy::effective_budget(claimed, report);
      std::cout << privacy::to_json(effective, report).dump(2) << '\n';
    } else if (*accountant) {
      const auto curve = privacy::compose(privacy::rdp_curve(q, sigma), steps);
      const auto eps = privacy::to_epsilon_delta(curve, acct_delta);
      const nlohmann::json out = {{"epsilon", privacy::epsilon_to_json(eps.epsilon)},
                                  {"best_order", eps.best_order},
                                  {"sigma", sigma},
                                  {"q", q},
                                  {"steps", steps},
                                  {"delta", acct_delta}};
      std::cout << out.dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
