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

#ifndef DPSYN_DATA_RECORDS_HPP_
#define DPSYN_DATA_RECORDS_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace dpsyn::data {

// One labeled document, optionally attributed to an author.
struct LabeledText {
  std::string text;
  std::string label;
  std::optional<std::string> author_id;

  friend bool operator==(const LabeledText&, const LabeledText&) = default;
};

using Dataset = std::vector<LabeledText>;

// Collapses runs of whitespace to one space and trims both ends.
std::string normalize_text(const std::string& text);

// One JSON object per line: {"text", "label", optional "author_id"}.
// Blank lines are skipped. Every malformed line is collected and reported in
// a single SchemaError carrying 1-based line numbers. Throws IoError when
// the file cannot be read.
Dataset load_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const Dataset& data);

nlohmann::json to_json(const LabeledText& record);

// Labels in first-appearance order.
std::vector<std::string> labels_of(const Dataset& data);

// Throws UnknownLabelError naming the first record outside `labels`.
void check_labels(const Dataset& data, const std::vector<std::string>& labels);

}  // namespace dpsyn::data

#endif  // DPSYN_DATA_RECORDS_HPP_
