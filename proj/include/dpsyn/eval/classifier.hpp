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

// Downstream text classifier trained on synthetic data: a fixed number of
// epochs, a validation pass after each, and the best snapshot by macro-F1.

#ifndef DPSYN_EVAL_CLASSIFIER_HPP_
#define DPSYN_EVAL_CLASSIFIER_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpsyn/data/records.hpp"
#include "dpsyn/eval/corpus.hpp"
#include "dpsyn/eval/metrics.hpp"
#include "dpsyn/rng.hpp"

namespace dpsyn::eval {

class TrainableClassifier {
 public:
  virtual ~TrainableClassifier() = default;
  virtual const std::vector<std::string>& labels() const = 0;
  // One pass over `data` in an order drawn from `rng`.
  virtual void train_epoch(const data::Dataset& data, Rng& rng) = 0;
  virtual std::string predict(const std::string& text) const = 0;
  virtual std::unique_ptr<TrainableClassifier> clone() const = 0;
};

// Softmax regression on the mean of learned word embeddings. Words outside
// the training vocabulary are ignored; a text with no known word scores on
// the bias alone.
class AveragedEmbeddingClassifier : public TrainableClassifier {
 public:
  AveragedEmbeddingClassifier(std::vector<std::string> labels, const data::Dataset& training,
                              int embedding_dim, double learning_rate, std::uint64_t seed);

  const std::vector<std::string>& labels() const override { return labels_; }
  void train_epoch(const data::Dataset& data, Rng& rng) override;
  std::string predict(const std::string& text) const override;
  std::unique_ptr<TrainableClassifier> clone() const override {
    return std::make_unique<AveragedEmbeddingClassifier>(*this);
  }

  Eigen::VectorXd logits(const std::string& text) const;

 private:
  std::vector<int> word_ids(const std::string& text) const;

  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> words_;
  Eigen::MatrixXd embedding_;  // words x dim
  Eigen::MatrixXd weight_;     // labels x dim
  Eigen::VectorXd bias_;
  double learning_rate_;
};

struct EpochScore {
  int epoch = 0;  // 1-based
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// Index of the highest macro-F1; accuracy is ignored and the earliest epoch
// wins ties.
std::size_t select_best_epoch(const std::vector<EpochScore>& scores);

struct ClassifierOptions {
  int epochs = 5;
  std::size_t validation_cap = 2000;
  int embedding_dim = 16;
  double learning_rate = 0.5;
};

struct SelectedClassifier {
  std::unique_ptr<TrainableClassifier> classifier;
  std::vector<EpochScore> epochs;  // one per epoch
  int best_epoch = 0;
  std::vector<std::string> warnings;
};

// Trains `model` for options.epochs epochs, scores the (capped) validation
// set after each, and returns a snapshot of the best epoch.
SelectedClassifier train_with_selection(const TrainableClassifier& model,
                                        const data::Dataset& training,
                                        const data::Dataset& validation, std::uint64_t seed,
                                        const ClassifierOptions& options);

// The averaged-embedding classifier on the corpus's successful records.
// Warns for every label whose texts all failed.
SelectedClassifier train_downstream_classifier(const SyntheticCorpus& corpus,
                                               const data::Dataset& validation,
                                               const std::vector<std::string>& labels,
                                               std::uint64_t seed,
                                               const ClassifierOptions& options = {});

Scores evaluate(const TrainableClassifier& classifier, const data::Dataset& test);

// Uniform subsample of at most `cap` records, input order kept.
data::Dataset cap_records(const data::Dataset& data, std::size_t cap, std::uint64_t seed);

}  // namespace dpsyn::eval

#endif  // DPSYN_EVAL_CLASSIFIER_HPP_
