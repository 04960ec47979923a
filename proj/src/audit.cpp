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

#include "dpsyn/privacy/audit.hpp"

#include <algorithm>
#include <map>

#include "dpsyn/errors.hpp"

namespace dpsyn::privacy {

AuditReport audit_author_contributions(const data::Dataset& dataset) {
  AuditReport report;
  std::map<std::string, std::int64_t> counts;
  for (const auto& record : dataset) {
    if (record.author_id.has_value() && !record.author_id->empty()) {
      ++counts[*record.author_id];
    } else {
      ++report.records_without_author;
    }
  }
  report.authors_known = report.records_without_author == 0;
  for (const auto& [author, count] : counts) {
    report.k_max = std::max(report.k_max, count);
    if (count > 1) report.offending_authors.push_back({author, count});
  }
  std::stable_sort(report.offending_authors.begin(), report.offending_authors.end(),
                   [](const AuthorCount& a, const AuthorCount& b) {
                     return a.count > b.count;
                   });
  return report;
}

EffectiveBudget effective_budget(const PrivacyBudget& claimed,
                                 const AuditReport& report) {
  EffectiveBudget out;
  out.budget = group_privacy(claimed, report.k_max);
  out.verifiable = report.authors_known;
  if (!report.authors_known) {
    out.annotation =
        "not verifiable: " + std::to_string(report.records_without_author) +
        " record(s) lack an author id; the guarantee holds per record, not per person";
  } else if (report.k_max > 1) {
    out.annotation = "group privacy applied for k_max=" + std::to_string(report.k_max);
  }
  return out;
}

nlohmann::json epsilon_to_json(double epsilon) {
  if (epsilon == kInfinity) return "inf";
  return epsilon;
}

double epsilon_from_json(const nlohmann::json& value) {
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    if (s == "inf" || s == "infinity") return kInfinity;
    throw DomainError("epsilon must be a number or \"inf\", got \"" + s + "\"");
  }
  if (!value.is_number()) throw DomainError("epsilon must be a number or \"inf\"");
  return value.get<double>();
}

nlohmann::json to_json(const EffectiveBudget& effective, const AuditReport& report) {
  nlohmann::json offenders = nlohmann::json::array();
  for (const auto& o : report.offending_authors) {
    offenders.push_back({{"author_id", o.author_id}, {"count", o.count}});
  }
  return {
      {"epsilon", epsilon_to_json(effective.budget.epsilon)},
      {"delta", effective.budget.delta},
      {"k_max", report.k_max},
      {"authors_known", report.authors_known},
      {"records_without_author", report.records_without_author},
      {"offending_authors", offenders},
      {"verifiable", effective.verifiable},
      {"annotation", effective.annotation},
  };
}

}  // namespace dpsyn::privacy
