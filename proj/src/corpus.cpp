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

#include "dpsyn/eval/corpus.hpp"

#include <fstream>

#include "dpsyn/errors.hpp"

namespace dpsyn::eval {

std::size_t SyntheticCorpus::num_failed() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.failed;
  return n;
}

data::Dataset SyntheticCorpus::as_dataset() const {
  data::Dataset out;
  for (const auto& r : records) {
    if (!r.failed) out.push_back({r.text, r.label, {}});
  }
  return out;
}

SyntheticCorpus generate_corpus(const TextGenerator& generator,
                                const data::PromptTemplate& tmpl, const GenerationSpec& spec,
                                const privacy::PrivacyBudget& provenance) {
  if (spec.n_per_label < 1) throw DomainError("n_per_label must be >= 1");
  if (spec.max_retries < 0) throw DomainError("max_retries must be >= 0");
  SyntheticCorpus corpus;
  corpus.provenance = provenance;
  const auto labels = tmpl.labels();
  corpus.records.reserve(labels.size() * spec.n_per_label);
  for (std::size_t l = 0; l < labels.size(); ++l) {
    const std::string instruction = data::render_prompt(tmpl, labels[l]);
    for (int n = 0; n < spec.n_per_label; ++n) {
      SyntheticRecord record;
      record.label = labels[l];
      record.generator = generator.id();
      record.failed = true;
      for (int attempt = 0; attempt <= spec.max_retries; ++attempt) {
        record.seed = derive_seed(spec.seed, {stream::kGenerate, l, static_cast<std::uint64_t>(n),
                                              static_cast<std::uint64_t>(attempt)});
        Rng rng(record.seed);
        std::string text;
        try {
          text = data::normalize_text(generator.generate(instruction, rng));
        } catch (const std::exception&) {
          text.clear();
        }
        if (!text.empty()) {
          record.text = std::move(text);
          record.failed = false;
          break;
        }
      }
      corpus.records.push_back(std::move(record));
    }
  }
  return corpus;
}

void write_corpus(const std::filesystem::path& path, const SyntheticCorpus& corpus) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : corpus.records) {
    const nlohmann::json j = {{"text", r.text},
                              {"label", r.label},
                              {"generator", r.generator},
                              {"seed", r.seed},
                              {"failed", r.failed}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<SyntheticRecord> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<SyntheticRecord> out;
  std::vector<std::size_t> bad;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (data::normalize_text(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("text").get<std::string>(), j.at("label").get<std::string>(),
                     j.at("generator").get<std::string>(), j.at("seed").get<std::uint64_t>(),
                     j.at("failed").get<bool>()});
    } catch (const nlohmann::json::exception&) {
      bad.push_back(number);
    }
  }
  if (!bad.empty()) {
    throw SchemaError(path.string() + ": malformed corpus line(s)", std::move(bad));
  }
  return out;
}

}  // namespace dpsyn::eval
