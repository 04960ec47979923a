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

// Label-conditioned instructions such as "write a great medicine review: ".

#ifndef DPSYN_DATA_PROMPT_HPP_
#define DPSYN_DATA_PROMPT_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace dpsyn::data {

inline constexpr const char* kLabelSlot = "{label}";

struct PromptTemplate {
  // Contains kLabelSlot exactly once.
  std::string pattern;
  std::map<std::string, std::string> label_phrases;

  // Throws std::invalid_argument on a pattern without exactly one slot.
  void validate() const;
  std::vector<std::string> labels() const;

  nlohmann::json to_json() const;
  static PromptTemplate from_json(const nlohmann::json& j);
};

// The pattern with the label's phrase in the slot; whitespace and
// punctuation around the slot are kept verbatim. Throws UnknownLabelError.
std::string render_prompt(const PromptTemplate& tmpl, const std::string& label);

// Reads {"pattern", "label_phrases"} from a JSON file.
PromptTemplate load_template(const std::filesystem::path& path);

// Built-in instruction sets: "spam", "swmh", "thumbs_up", "webmd", "toy".
// Throws std::invalid_argument for other names.
PromptTemplate builtin_template(const std::string& name);

}  // namespace dpsyn::data

#endif  // DPSYN_DATA_PROMPT_HPP_
