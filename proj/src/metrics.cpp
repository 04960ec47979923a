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

#include "dpsyn/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "dpsyn/errors.hpp"

namespace dpsyn::eval {

Scores classification_scores(const std::vector<std::string>& gold,
                             const std::vector<std::string>& predicted,
                             const std::vector<std::string>& labels) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("predictions and gold labels differ in length");
  }
  if (gold.empty()) throw std::invalid_argument("no examples to score");
  struct Counts {
    std::int64_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> counts;
  for (const auto& l : labels) counts[l];
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == predicted[i]) {
      ++correct;
      ++counts[gold[i]].tp;
    } else {
      ++counts[gold[i]].fn;
      ++counts[predicted[i]].fp;
    }
  }
  double f1_sum = 0.0;
  for (const auto& [label, c] : counts) {
    const std::int64_t denom = 2 * c.tp + c.fp + c.fn;
    f1_sum += denom == 0 ? 0.0 : 2.0 * c.tp / static_cast<double>(denom);
  }
  return {static_cast<double>(correct) / gold.size(), f1_sum / counts.size()};
}

std::vector<double> AutoregressiveReference::token_log_probs(const std::string& text) const {
  std::vector<models::TokenId> ids{models::kSepId};
  for (auto id : vocab_.tokenize(text)) ids.push_back(id);
  if (ids.size() == 1) return {};
  const auto limit = static_cast<std::size_t>(model_.config().max_sequence_length);
  if (ids.size() + 1 > limit) ids.resize(limit - 1);
  ids.push_back(models::kEosId);
  return model_.token_log_probs(params_, ids);
}

NllTotals nll_totals(const ReferenceModel& reference, const std::vector<std::string>& texts) {
  NllTotals totals;
  for (const auto& text : texts) {
    for (double lp : reference.token_log_probs(text)) {
      totals.nll -= lp;
      ++totals.tokens;
    }
  }
  return totals;
}

double perplexity(const NllTotals& totals) {
  if (totals.tokens == 0) throw DomainError("perplexity is undefined without tokens");
  return std::exp(totals.nll / static_cast<double>(totals.tokens));
}

double perplexity(const ReferenceModel& reference, const std::vector<std::string>& texts) {
  return perplexity(nll_totals(reference, texts));
}

MetricSummary summarize(std::vector<std::pair<std::uint64_t, double>> values) {
  if (values.empty()) throw std::invalid_argument("no values to summarize");
  std::sort(values.begin(), values.end());
  MetricSummary s;
  for (const auto& [seed, v] : values) s.mean += v;
  s.mean /= values.size();
  double var = 0.0;
  for (const auto& [seed, v] : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / values.size());
  s.per_seed = std::move(values);
  return s;
}

EvalReport multi_seed_report(std::vector<RunMetrics> runs) {
  if (runs.empty()) throw std::invalid_argument("multi_seed_report needs at least one run");
  std::sort(runs.begin(), runs.end(), [](const RunMetrics& a, const RunMetrics& b) {
    return a.seed < b.seed;
  });
  std::vector<std::pair<std::uint64_t, double>> acc, f1, ppl;
  for (const auto& r : runs) {
    acc.emplace_back(r.seed, r.accuracy);
    f1.emplace_back(r.seed, r.macro_f1);
    if (r.perplexity) ppl.emplace_back(r.seed, *r.perplexity);
  }
  EvalReport report;
  report.accuracy = summarize(std::move(acc));
  report.macro_f1 = summarize(std::move(f1));
  if (!ppl.empty()) report.perplexity = summarize(std::move(ppl));
  report.runs = std::move(runs);
  return report;
}

nlohmann::json to_json(const MetricSummary& summary) {
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& [seed, v] : summary.per_seed) per_seed.push_back({{"seed", seed}, {"value", v}});
  return {{"mean", summary.mean}, {"std", summary.std}, {"per_seed", per_seed}};
}

nlohmann::json to_json(const EvalReport& report) {
  return {{"accuracy", to_json(report.accuracy)},
          {"macro_f1", to_json(report.macro_f1)},
          {"perplexity", report.perplexity ? to_json(*report.perplexity) : nlohmann::json()}};
}

}  // namespace dpsyn::eval
