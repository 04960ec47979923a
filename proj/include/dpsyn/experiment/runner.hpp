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

// End-to-end runs: ingest, audit, optional pretraining, training, synthesis,
// evaluation and reporting, with every artifact listed in a manifest.

#ifndef DPSYN_EXPERIMENT_RUNNER_HPP_
#define DPSYN_EXPERIMENT_RUNNER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpsyn/data/transforms.hpp"
#include "dpsyn/eval/metrics.hpp"
#include "dpsyn/experiment/config.hpp"
#include "dpsyn/models/vocabulary.hpp"
#include "dpsyn/privacy/audit.hpp"

namespace dpsyn::experiment {

// Everything derived from the data before any model sees it.
struct PreparedData {
  data::DatasetSplit split;
  std::vector<std::string> labels;  // template order
  std::optional<data::Dataset> public_texts;
  models::Vocabulary vocab;
  // False when no public corpus exists and the vocabulary had to be read
  // off the private training split.
  bool vocabulary_is_public = false;
};

PreparedData prepare_data(const ExperimentConfig& config);

struct SeedOutcome {
  std::uint64_t seed = 0;
  privacy::PrivacyBudget realized;
  double noise_multiplier = 0.0;
  double sample_rate = 0.0;
  std::int64_t num_steps = 0;
  // Generator loss on the validation split with fixed noise draws.
  double validation_loss = 0.0;
  eval::RunMetrics metrics;
  std::vector<eval::EpochScore> classifier_epochs;
  int best_epoch = 0;
  std::size_t failed_generations = 0;
  std::vector<std::string> warnings;
};

struct RunOutcome {
  std::filesystem::path directory;
  std::string config_hash;
  std::size_t train_size = 0;
  privacy::AuditReport audit;
  privacy::EffectiveBudget effective;  // realized budget under the audit
  std::vector<SeedOutcome> seeds;      // in config order
  eval::EvalReport report;
};

struct RunOptions {
  // Replace an existing non-empty output directory instead of refusing.
  bool overwrite = false;
  // Progress lines; may be empty.
  std::function<void(const std::string&)> log;
};

// Writes manifest.json, metrics.json, audit.json and per-seed artifacts
// under config.output_dir. Throws UnsatisfiableError when the budget cannot
// be met, DomainError when require_unique_authors fails, and IoError when
// the directory is not writable or already holds files.
RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct SweepCell {
  std::string dataset;
  std::string model;
  double epsilon = 0.0;
  std::optional<RunOutcome> outcome;
  std::string failure;  // "calibration", "schema", ... when outcome is empty
  double seconds = 0.0;  // wall time of the cell
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::string table;  // markdown, also written to table.md
};

// Sweep file: {"output_dir", "base": config, "grid": {"model.kind": [...],
// "epsilon": [...], ...}} and/or "cells": [config patches]. Each cell is
// base merged with its patch; cell directories sit under output_dir.
struct SweepSpec {
  std::filesystem::path output_dir = "runs/sweep";
  std::vector<ExperimentConfig> cells;
};

SweepSpec load_sweep(const std::filesystem::path& path);
SweepSpec sweep_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

// Runs every cell; a failing cell is recorded and the sweep continues.
SweepResult sweep(const SweepSpec& spec, const RunOptions& options = {});

// One row per cell keyed by (dataset, model, epsilon), mean (+- std).
std::string format_table(const std::vector<SweepCell>& cells);

}  // namespace dpsyn::experiment

#endif  // DPSYN_EXPERIMENT_RUNNER_HPP_
