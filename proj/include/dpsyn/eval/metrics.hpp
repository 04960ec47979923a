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

// Utility metrics: accuracy and macro-F1, reference-model perplexity, and
// mean +- std aggregation over seeds.

#ifndef DPSYN_EVAL_METRICS_HPP_
#define DPSYN_EVAL_METRICS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dpsyn/models/autoregressive.hpp"
#include "dpsyn/models/vocabulary.hpp"
#include "json.hpp"

namespace dpsyn::eval {

struct Scores {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// Macro-F1 averages per-class F1 over `labels`; a class with no gold and no
// predicted occurrence contributes 0. Throws std::invalid_argument when the
// sequences differ in length or are empty.
Scores classification_scores(const std::vector<std::string>& gold,
                             const std::vector<std::string>& predicted,
                             const std::vector<std::string>& labels);

// Log-probabilities a reference model assigns to the scored tokens of one
// text. Empty texts score no tokens.
class ReferenceModel {
 public:
  virtual ~ReferenceModel() = default;
  virtual std::vector<double> token_log_probs(const std::string& text) const = 0;
};

// Scores <sep> text <eos>: every text token and the closing eos.
class AutoregressiveReference : public ReferenceModel {
 public:
  AutoregressiveReference(const models::AutoregressiveLm& model, nn::Vector params,
                          const models::Vocabulary& vocab)
      : model_(model), params_(std::move(params)), vocab_(vocab) {}
  std::vector<double> token_log_probs(const std::string& text) const override;

 private:
  const models::AutoregressiveLm& model_;
  nn::Vector params_;
  const models::Vocabulary& vocab_;
};

struct NllTotals {
  double nll = 0.0;
  std::int64_t tokens = 0;

  NllTotals& operator+=(const NllTotals& other) {
    nll += other.nll;
    tokens += other.tokens;
    return *this;
  }
};

NllTotals nll_totals(const ReferenceModel& reference, const std::vector<std::string>& texts);

// exp(pooled NLL / pooled token count). Throws DomainError with no tokens.
double perplexity(const NllTotals& totals);
double perplexity(const ReferenceModel& reference, const std::vector<std::string>& texts);

struct RunMetrics {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> perplexity;  // absent when undefined for the run
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::vector<std::pair<std::uint64_t, double>> per_seed;
};

struct EvalReport {
  MetricSummary accuracy;
  MetricSummary macro_f1;
  std::optional<MetricSummary> perplexity;  // over runs where it is defined
  std::vector<RunMetrics> runs;             // sorted by seed
};

// Runs are ordered by seed first, so the report ignores input order.
// Throws std::invalid_argument on an empty list.
EvalReport multi_seed_report(std::vector<RunMetrics> runs);

MetricSummary summarize(std::vector<std::pair<std::uint64_t, double>> values);

nlohmann::json to_json(const MetricSummary& summary);
nlohmann::json to_json(const EvalReport& report);

}  // namespace dpsyn::eval

#endif  // DPSYN_EVAL_METRICS_HPP_
