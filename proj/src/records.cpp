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

#include "dpsyn/data/records.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dpsyn/errors.hpp"

namespace dpsyn::data {

std::string normalize_text(const std::string& text) {
  std::istringstream in(text);
  std::string word, out;
  while (in >> word) {
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

namespace {

// Empty string when the line is a valid record.
std::string parse_record(const std::string& line, LabeledText& record) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    return "invalid JSON";
  }
  if (!j.is_object()) return "not a JSON object";
  if (!j.contains("text") || !j["text"].is_string()) return "missing string field \"text\"";
  if (!j.contains("label") || !j["label"].is_string()) return "missing string field \"label\"";
  record.text = normalize_text(j["text"].get<std::string>());
  record.label = j["label"].get<std::string>();
  record.author_id.reset();
  if (j.contains("author_id") && !j["author_id"].is_null()) {
    if (!j["author_id"].is_string()) return "\"author_id\" must be a string";
    record.author_id = j["author_id"].get<std::string>();
  }
  if (record.text.empty()) return "empty text";
  if (record.label.empty()) return "empty label";
  return {};
}

}  // namespace

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  Dataset data;
  std::vector<std::size_t> bad;
  std::string first_problem;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (normalize_text(line).empty()) continue;
    LabeledText record;
    const std::string problem = parse_record(line, record);
    if (problem.empty()) {
      data.push_back(std::move(record));
    } else {
      if (bad.empty()) first_problem = problem;
      bad.push_back(number);
    }
  }
  if (in.bad()) throw IoError("failed reading " + path.string());
  if (!bad.empty()) {
    std::string lines;
    for (std::size_t i = 0; i < bad.size(); ++i) {
      lines += (i ? ", " : "") + std::to_string(bad[i]);
    }
    throw SchemaError(path.string() + ": malformed record(s) on line(s) " + lines + " (first: " +
                          first_problem + ")",
                      std::move(bad));
  }
  return data;
}

nlohmann::json to_json(const LabeledText& record) {
  nlohmann::json j = {{"text", record.text}, {"label", record.label}};
  if (record.author_id) j["author_id"] = *record.author_id;
  return j;
}

void write_jsonl(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& record : data) out << to_json(record).dump() << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::string> labels_of(const Dataset& data) {
  std::vector<std::string> labels;
  for (const auto& r : data) {
    if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) {
      labels.push_back(r.label);
    }
  }
  return labels;
}

void check_labels(const Dataset& data, const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (std::find(labels.begin(), labels.end(), data[i].label) == labels.end()) {
      throw UnknownLabelError("record " + std::to_string(i) + " has undeclared label \"" +
                              data[i].label + "\"");
    }
  }
}

}  // namespace dpsyn::data
