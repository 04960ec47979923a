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

#include "dpsyn/data/prompt.hpp"

#include <fstream>
#include <stdexcept>

#include "dpsyn/errors.hpp"

namespace dpsyn::data {

void PromptTemplate::validate() const {
  const auto first = pattern.find(kLabelSlot);
  if (first == std::string::npos) {
    throw std::invalid_argument("prompt pattern has no " + std::string(kLabelSlot) + " slot");
  }
  if (pattern.find(kLabelSlot, first + 1) != std::string::npos) {
    throw std::invalid_argument("prompt pattern has more than one label slot");
  }
  if (label_phrases.empty()) throw std::invalid_argument("prompt template has no labels");
}

std::vector<std::string> PromptTemplate::labels() const {
  std::vector<std::string> out;
  for (const auto& [label, phrase] : label_phrases) out.push_back(label);
  return out;
}

nlohmann::json PromptTemplate::to_json() const {
  return {{"pattern", pattern}, {"label_phrases", label_phrases}};
}

PromptTemplate PromptTemplate::from_json(const nlohmann::json& j) {
  PromptTemplate t;
  t.pattern = j.at("pattern").get<std::string>();
  t.label_phrases = j.at("label_phrases").get<std::map<std::string, std::string>>();
  t.validate();
  return t;
}

std::string render_prompt(const PromptTemplate& tmpl, const std::string& label) {
  const auto it = tmpl.label_phrases.find(label);
  if (it == tmpl.label_phrases.end()) {
    throw UnknownLabelError("no instruction phrase for label \"" + label + "\"");
  }
  std::string out = tmpl.pattern;
  const auto slot = out.find(kLabelSlot);
  if (slot == std::string::npos) throw std::invalid_argument("prompt pattern has no label slot");
  out.replace(slot, std::char_traits<char>::length(kLabelSlot), it->second);
  return out;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read template " + path.string());
  try {
    return PromptTemplate::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("malformed template " + path.string() + ": " + e.what(), {});
  }
}

namespace {

PromptTemplate identity(std::string pattern, const std::vector<std::string>& labels) {
  PromptTemplate t;
  t.pattern = std::move(pattern);
  for (const auto& l : labels) t.label_phrases[l] = l;
  return t;
}

}  // namespace

PromptTemplate builtin_template(const std::string& name) {
  if (name == "spam") return identity("write a {label} e-mail:", {"spam", "non-spam"});
  if (name == "swmh") {
    return identity("write a post to the {label} community: ",
                    {"anxiety", "bipolar", "depression", "offmychest", "suicidewatch"});
  }
  if (name == "thumbs_up") {
    return identity("write a {label} negative app review: ",
                    {"mild", "notable", "concerning", "serious", "hot"});
  }
  if (name == "webmd") {
    return identity("write a {label} medicine review: ",
                    {"terrible", "poor", "neutral", "good", "great"});
  }
  if (name == "toy") return identity("write a {label} review: ", {"alpha", "beta"});
  throw std::invalid_argument("unknown built-in template \"" + name + "\"");
}

}  // namespace dpsyn::data
