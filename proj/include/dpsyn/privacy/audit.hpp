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

// Author-contribution auditing. A DP guarantee over records only protects a
// person if each person owns one record; otherwise the guarantee degrades to
// group privacy over the largest per-author group.

#ifndef DPSYN_PRIVACY_AUDIT_HPP_
#define DPSYN_PRIVACY_AUDIT_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dpsyn/data/records.hpp"
#include "dpsyn/privacy/accountant.hpp"
#include "json.hpp"

namespace dpsyn::privacy {

struct AuthorCount {
  std::string author_id;
  std::int64_t count;

  friend bool operator==(const AuthorCount&, const AuthorCount&) = default;
};

struct AuditReport {
  std::int64_t k_max = 1;
  bool authors_known = true;
  std::int64_t records_without_author = 0;
  // Authors with more than one record, largest first.
  std::vector<AuthorCount> offending_authors;
};

AuditReport audit_author_contributions(const data::Dataset& dataset);

struct EffectiveBudget {
  PrivacyBudget budget;
  // False when the audit could not attribute every record to an author.
  bool verifiable = true;
  std::string annotation;
};

EffectiveBudget effective_budget(const PrivacyBudget& claimed,
                                 const AuditReport& report);

// {epsilon, delta, k_max, authors_known, offending_authors, ...}. An
// infinite epsilon is written as the string "inf".
nlohmann::json to_json(const EffectiveBudget& effective, const AuditReport& report);

// Number <-> JSON with "inf" for +infinity.
nlohmann::json epsilon_to_json(double epsilon);
double epsilon_from_json(const nlohmann::json& value);

}  // namespace dpsyn::privacy

#endif  // DPSYN_PRIVACY_AUDIT_HPP_
