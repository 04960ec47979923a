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

// Declarative experiment description. Every field has a default, so a
// config file only lists what it changes; see README.md for the format.

#ifndef DPSYN_EXPERIMENT_CONFIG_HPP_
#define DPSYN_EXPERIMENT_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpsyn/data/prompt.hpp"
#include "dpsyn/data/transforms.hpp"
#include "dpsyn/eval/classifier.hpp"
#include "dpsyn/eval/corpus.hpp"
#include "dpsyn/models/autoregressive.hpp"
#include "dpsyn/models/diffusion.hpp"
#include "json.hpp"

namespace dpsyn::experiment {

// Either a JSONL file or a generated toy corpus.
struct CorpusSource {
  std::optional<std::filesystem::path> path;
  std::optional<data::ToySpec> toy;

  bool empty() const { return !path && !toy; }
};

struct DatasetConfig {
  std::string name;  // table key; defaults to "toy" or the file stem
  CorpusSource source;
  data::PromptTemplate prompt;
  std::uint64_t seed = 0;  // toy generation, balancing and splitting
  std::vector<double> split{0.8, 0.1, 0.1};
  bool balance = false;
};

struct TrainingConfig {
  double epsilon = 8.0;           // +inf for non-private training
  std::optional<double> delta;    // empty: 1 / (10 n)
  double clip_norm = 1.0;
  double expected_lot_size = 64;
  double epochs = 10;
  std::optional<std::int64_t> steps;  // overrides epochs when set
  double learning_rate = 0.1;
};

struct PretrainConfig {
  bool enabled = false;
  models::PretrainOptions options;
};

struct ReferenceConfig {
  bool enabled = true;
  nlohmann::json architecture = nlohmann::json::object();  // ArConfig overrides
  double epochs = 5;
  double batch_size = 16;
  double learning_rate = 0.1;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  // Public text for the perplexity reference and for pretraining. A toy
  // dataset defaults to a fresh toy draw of the same spec.
  CorpusSource public_corpus;
  std::string model_kind = "autoregressive";
  nlohmann::json architecture = nlohmann::json::object();  // model config overrides
  models::SamplingOptions sampling;
  bool clamp = false;  // diffusion decoding
  TrainingConfig training;
  PretrainConfig pretraining;
  ReferenceConfig reference;
  eval::GenerationSpec generation;
  eval::ClassifierOptions classifier;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::filesystem::path output_dir = "runs/experiment";
  bool require_unique_authors = false;

  // Throws SchemaError / DomainError with the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  // Relative paths resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = {});
};

ExperimentConfig load_config(const std::filesystem::path& path);

// 64-bit FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

// Same hash over raw bytes.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace dpsyn::experiment

#endif  // DPSYN_EXPERIMENT_CONFIG_HPP_
