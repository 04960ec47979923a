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

#include "dpsyn/eval/classifier.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dpsyn/errors.hpp"

namespace dpsyn::eval {

AveragedEmbeddingClassifier::AveragedEmbeddingClassifier(std::vector<std::string> labels,
                                                         const data::Dataset& training,
                                                         int embedding_dim,
                                                         double learning_rate,
                                                         std::uint64_t seed)
    : labels_(std::move(labels)), learning_rate_(learning_rate) {
  if (labels_.empty()) throw std::invalid_argument("classifier needs labels");
  if (embedding_dim < 1 || !(learning_rate > 0.0)) {
    throw std::invalid_argument("classifier needs a positive size and learning rate");
  }
  for (const auto& r : training) {
    std::istringstream in(r.text);
    std::string w;
    while (in >> w) words_.emplace(w, static_cast<int>(words_.size()));
  }
  Rng rng = make_rng(seed, {stream::kClassifier, 0});
  std::normal_distribution<double> normal(0.0, 0.1);
  embedding_.resize(static_cast<Eigen::Index>(words_.size()), embedding_dim);
  for (auto& x : embedding_.reshaped()) x = normal(rng);
  weight_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels_.size()), embedding_dim);
  bias_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(labels_.size()));
}

std::vector<int> AveragedEmbeddingClassifier::word_ids(const std::string& text) const {
  std::vector<int> ids;
  std::istringstream in(text);
  std::string w;
  while (in >> w) {
    const auto it = words_.find(w);
    if (it != words_.end()) ids.push_back(it->second);
  }
  return ids;
}

Eigen::VectorXd AveragedEmbeddingClassifier::logits(const std::string& text) const {
  const auto ids = word_ids(text);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(embedding_.cols());
  for (int id : ids) h += embedding_.row(id).transpose();
  if (!ids.empty()) h /= static_cast<double>(ids.size());
  return weight_ * h + bias_;
}

void AveragedEmbeddingClassifier::train_epoch(const data::Dataset& data, Rng& rng) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t index : order) {
    const auto& record = data[index];
    const auto label_it = std::find(labels_.begin(), labels_.end(), record.label);
    if (label_it == labels_.end()) {
      throw UnknownLabelError("training label \"" + record.label + "\" is not declared");
    }
    const auto ids = word_ids(record.text);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(embedding_.cols());
    for (int id : ids) h += embedding_.row(id).transpose();
    if (!ids.empty()) h /= static_cast<double>(ids.size());
    Eigen::VectorXd z = weight_ * h + bias_;
    Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
    p /= p.sum();
    p(label_it - labels_.begin()) -= 1.0;  // d loss / d logits
    const Eigen::VectorXd dh = weight_.transpose() * p;
    weight_.noalias() -= learning_rate_ * p * h.transpose();
    bias_ -= learning_rate_ * p;
    if (!ids.empty()) {
      const Eigen::RowVectorXd step = (learning_rate_ / ids.size()) * dh.transpose();
      for (int id : ids) embedding_.row(id) -= step;
    }
  }
}

std::string AveragedEmbeddingClassifier::predict(const std::string& text) const {
  const Eigen::VectorXd z = logits(text);
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < z.size(); ++k) {
    if (z(k) > z(best)) best = k;
  }
  return labels_[best];
}

std::size_t select_best_epoch(const std::vector<EpochScore>& scores) {
  if (scores.empty()) throw std::invalid_argument("no epochs to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].macro_f1 > scores[best].macro_f1) best = i;
  }
  return best;
}

data::Dataset cap_records(const data::Dataset& data, std::size_t cap, std::uint64_t seed) {
  if (data.size() <= cap) return data;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, {stream::kValidation});
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(cap);
  std::sort(order.begin(), order.end());
  data::Dataset out;
  out.reserve(cap);
  for (std::size_t i : order) out.push_back(data[i]);
  return out;
}

Scores evaluate(const TrainableClassifier& classifier, const data::Dataset& test) {
  std::vector<std::string> gold, predicted;
  gold.reserve(test.size());
  predicted.reserve(test.size());
  for (const auto& r : test) {
    gold.push_back(r.label);
    predicted.push_back(classifier.predict(r.text));
  }
  return classification_scores(gold, predicted, classifier.labels());
}

SelectedClassifier train_with_selection(const TrainableClassifier& model,
                                        const data::Dataset& training,
                                        const data::Dataset& validation, std::uint64_t seed,
                                        const ClassifierOptions& options) {
  if (options.epochs < 1) throw std::invalid_argument("need at least one epoch");
  if (validation.empty()) throw std::invalid_argument("empty validation set");
  const data::Dataset held_out = cap_records(validation, options.validation_cap, seed);
  auto current = model.clone();
  SelectedClassifier out;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    Rng rng = make_rng(seed, {stream::kClassifier, static_cast<std::uint64_t>(epoch)});
    current->train_epoch(training, rng);
    const Scores s = evaluate(*current, held_out);
    out.epochs.push_back({epoch, s.accuracy, s.macro_f1});
    if (select_best_epoch(out.epochs) == out.epochs.size() - 1) {
      out.classifier = current->clone();
      out.best_epoch = epoch;
    }
  }
  return out;
}

SelectedClassifier train_downstream_classifier(const SyntheticCorpus& corpus,
                                               const data::Dataset& validation,
                                               const std::vector<std::string>& labels,
                                               std::uint64_t seed,
                                               const ClassifierOptions& options) {
  const data::Dataset training = corpus.as_dataset();
  std::vector<std::string> warnings;
  for (const auto& label : labels) {
    const bool any = std::any_of(training.begin(), training.end(),
                                 [&](const data::LabeledText& r) { return r.label == label; });
    if (!any) warnings.push_back("degenerate corpus: every text for label \"" + label + "\" is empty");
  }
  for (const auto& r : validation) {
    if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) {
      throw UnknownLabelError("validation label \"" + r.label + "\" is not covered");
    }
  }
  const AveragedEmbeddingClassifier model(labels, training, options.embedding_dim,
                                          options.learning_rate, seed);
  SelectedClassifier out = train_with_selection(model, training, validation, seed, options);
  out.warnings = std::move(warnings);
  return out;
}

}  // namespace dpsyn::eval
