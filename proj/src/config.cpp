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

#include "dpsyn/experiment/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "dpsyn/errors.hpp"
#include "dpsyn/privacy/audit.hpp"

namespace dpsyn::experiment {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + " must be an object", {});
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw SchemaError("unknown key \"" + key + "\" in " + where, {});
  }
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

CorpusSource source_from_json(const json& j, const std::filesystem::path& base,
                              const std::string& where) {
  CorpusSource s;
  if (j.contains("path")) s.path = resolve(j.at("path").get<std::string>(), base);
  if (j.contains("toy")) s.toy = data::ToySpec::from_json(j.at("toy"));
  if (s.path && s.toy) throw SchemaError(where + " sets both \"path\" and \"toy\"", {});
  return s;
}

json source_to_json(const CorpusSource& s) {
  json j = json::object();
  if (s.path) j["path"] = s.path->string();
  if (s.toy) j["toy"] = s.toy->to_json();
  return j;
}

data::PromptTemplate template_from_json(const json& j, const std::filesystem::path& base) {
  if (j.is_object()) return data::PromptTemplate::from_json(j);
  const auto name = j.get<std::string>();
  if (name.size() > 5 && name.ends_with(".json")) return data::load_template(resolve(name, base));
  return data::builtin_template(name);
}

std::uint64_t parse_seed(const json& j) {
  // Programmatic JSON stores small literals as signed integers.
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    throw SchemaError("seeds must be non-negative integers", {});
  }
  return j.get<std::uint64_t>();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.source.empty()) throw SchemaError("dataset needs \"path\" or \"toy\"", {});
  dataset.prompt.validate();
  if (dataset.split.size() != 3) {
    throw SchemaError("dataset.split needs three ratios (train, validation, test)", {});
  }
  if (model_kind != "autoregressive" && model_kind != "diffusion") {
    throw SchemaError("model.kind must be \"autoregressive\" or \"diffusion\"", {});
  }
  if (std::isnan(training.epsilon) || training.epsilon <= 0.0) {
    throw DomainError("epsilon must be positive or \"inf\"");
  }
  if (training.delta && !(*training.delta > 0.0 && *training.delta < 1.0)) {
    throw DomainError("delta must lie in (0, 1)");
  }
  if (!(training.clip_norm > 0.0)) throw DomainError("dpsgd.clip_norm must be positive");
  if (!(training.expected_lot_size >= 1.0)) {
    throw DomainError("dpsgd.expected_lot_size must be >= 1");
  }
  if (!(training.epochs > 0.0)) throw DomainError("dpsgd.epochs must be positive");
  if (training.steps && *training.steps < 1) throw DomainError("dpsgd.steps must be >= 1");
  if (!(training.learning_rate > 0.0)) throw DomainError("dpsgd.learning_rate must be positive");
  if (pretraining.enabled && model_kind != "diffusion") {
    throw SchemaError("pretraining applies to the diffusion model only", {});
  }
  if (pretraining.enabled && public_corpus.empty() && !dataset.source.toy) {
    throw SchemaError("pretraining needs a public_corpus", {});
  }
  if (generation.n_per_label < 1) throw DomainError("generation.n_per_label must be >= 1");
  if (generation.max_retries < 0) throw DomainError("generation.max_retries must be >= 0");
  if (classifier.epochs < 1) throw DomainError("classifier.epochs must be >= 1");
  if (seeds.empty()) throw SchemaError("seeds must list at least one seed", {});
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw SchemaError("seeds must be distinct", {});
  }
}

json ExperimentConfig::to_json() const {
  json ds = {{"name", dataset.name},
             {"template", dataset.prompt.to_json()},
             {"seed", dataset.seed},
             {"split", dataset.split},
             {"balance", dataset.balance}};
  ds.update(source_to_json(dataset.source));
  return {
      {"dataset", ds},
      {"public_corpus", source_to_json(public_corpus)},
      {"model",
       {{"kind", model_kind},
        {"architecture", architecture},
        {"sampling",
         {{"max_new_tokens", sampling.max_new_tokens},
          {"temperature", sampling.temperature},
          {"top_k", sampling.top_k}}},
        {"clamp", clamp}}},
      {"epsilon", privacy::epsilon_to_json(training.epsilon)},
      {"delta", training.delta ? json(*training.delta) : json("auto")},
      {"dpsgd",
       {{"clip_norm", training.clip_norm},
        {"expected_lot_size", training.expected_lot_size},
        {"epochs", training.epochs},
        {"steps", training.steps ? json(*training.steps) : json()},
        {"learning_rate", training.learning_rate}}},
      {"pretraining",
       {{"enabled", pretraining.enabled},
        {"span_fraction", pretraining.options.span_fraction},
        {"steps", pretraining.options.steps},
        {"batch_size", pretraining.options.batch_size},
        {"learning_rate", pretraining.options.learning_rate}}},
      {"reference",
       {{"enabled", reference.enabled},
        {"architecture", reference.architecture},
        {"epochs", reference.epochs},
        {"batch_size", reference.batch_size},
        {"learning_rate", reference.learning_rate}}},
      {"generation",
       {{"n_per_label", generation.n_per_label}, {"max_retries", generation.max_retries}}},
      {"classifier",
       {{"epochs", classifier.epochs},
        {"validation_cap", classifier.validation_cap},
        {"embedding_dim", classifier.embedding_dim},
        {"learning_rate", classifier.learning_rate}}},
      {"seeds", seeds},
      {"output_dir", output_dir.string()},
      {"require_unique_authors", require_unique_authors},
  };
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base) {
  ExperimentConfig c;
  try {
    check_keys(j,
               {"dataset", "public_corpus", "model", "epsilon", "delta", "dpsgd", "pretraining",
                "reference", "generation", "classifier", "seeds", "output_dir",
                "require_unique_authors"},
               "config");
    const json& ds = j.at("dataset");
    check_keys(ds, {"name", "path", "toy", "template", "seed", "split", "balance"}, "dataset");
    c.dataset.source = source_from_json(ds, base, "dataset");
    c.dataset.name = ds.value("name", c.dataset.source.toy ? std::string("toy")
                                      : c.dataset.source.path
                                          ? c.dataset.source.path->stem().string()
                                          : std::string());
    if (ds.contains("template")) {
      c.dataset.prompt = template_from_json(ds.at("template"), base);
    } else if (c.dataset.source.toy) {
      c.dataset.prompt = data::builtin_template("toy");
      // The builtin toy template names alpha/beta; other toy labels get
      // identity phrases.
      c.dataset.prompt.label_phrases.clear();
      for (const auto& l : c.dataset.source.toy->labels) c.dataset.prompt.label_phrases[l] = l;
    } else {
      throw SchemaError("dataset.template is required for JSONL data", {});
    }
    c.dataset.seed = ds.value("seed", c.dataset.seed);
    c.dataset.split = ds.value("split", c.dataset.split);
    c.dataset.balance = ds.value("balance", c.dataset.balance);

    if (j.contains("public_corpus")) {
      check_keys(j.at("public_corpus"), {"path", "toy"}, "public_corpus");
      c.public_corpus = source_from_json(j.at("public_corpus"), base, "public_corpus");
    }
    if (j.contains("model")) {
      const json& m = j.at("model");
      check_keys(m, {"kind", "architecture", "sampling", "clamp"}, "model");
      c.model_kind = m.value("kind", c.model_kind);
      c.architecture = m.value("architecture", c.architecture);
      if (m.contains("sampling")) {
        const json& s = m.at("sampling");
        check_keys(s, {"max_new_tokens", "temperature", "top_k"}, "model.sampling");
        c.sampling.max_new_tokens = s.value("max_new_tokens", c.sampling.max_new_tokens);
        c.sampling.temperature = s.value("temperature", c.sampling.temperature);
        c.sampling.top_k = s.value("top_k", c.sampling.top_k);
      }
      c.clamp = m.value("clamp", c.clamp);
    }
    if (j.contains("epsilon")) {
      try {
        c.training.epsilon = privacy::epsilon_from_json(j.at("epsilon"));
      } catch (const DomainError& e) {
        throw SchemaError(e.what(), {});
      }
    }
    if (j.contains("delta")) {
      const json& d = j.at("delta");
      if (d.is_string()) {
        if (d.get<std::string>() != "auto") throw SchemaError("delta must be \"auto\" or a number", {});
      } else {
        c.training.delta = d.get<double>();
      }
    }
    if (j.contains("dpsgd")) {
      const json& d = j.at("dpsgd");
      check_keys(d, {"clip_norm", "expected_lot_size", "epochs", "steps", "learning_rate"}, "dpsgd");
      c.training.clip_norm = d.value("clip_norm", c.training.clip_norm);
      c.training.expected_lot_size = d.value("expected_lot_size", c.training.expected_lot_size);
      c.training.epochs = d.value("epochs", c.training.epochs);
      if (d.contains("steps") && !d.at("steps").is_null()) {
        c.training.steps = d.at("steps").get<std::int64_t>();
      }
      c.training.learning_rate = d.value("learning_rate", c.training.learning_rate);
    }
    if (j.contains("pretraining")) {
      const json& p = j.at("pretraining");
      check_keys(p, {"enabled", "span_fraction", "steps", "batch_size", "learning_rate"},
                 "pretraining");
      auto& o = c.pretraining.options;
      c.pretraining.enabled = p.value("enabled", true);
      o.span_fraction = p.value("span_fraction", o.span_fraction);
      o.steps = p.value("steps", o.steps);
      o.batch_size = p.value("batch_size", o.batch_size);
      o.learning_rate = p.value("learning_rate", o.learning_rate);
    }
    if (j.contains("reference")) {
      const json& r = j.at("reference");
      check_keys(r, {"enabled", "architecture", "epochs", "batch_size", "learning_rate"},
                 "reference");
      c.reference.enabled = r.value("enabled", c.reference.enabled);
      c.reference.architecture = r.value("architecture", c.reference.architecture);
      c.reference.epochs = r.value("epochs", c.reference.epochs);
      c.reference.batch_size = r.value("batch_size", c.reference.batch_size);
      c.reference.learning_rate = r.value("learning_rate", c.reference.learning_rate);
    }
    if (j.contains("generation")) {
      const json& g = j.at("generation");
      check_keys(g, {"n_per_label", "max_retries"}, "generation");
      c.generation.n_per_label = g.value("n_per_label", c.generation.n_per_label);
      c.generation.max_retries = g.value("max_retries", c.generation.max_retries);
    }
    if (j.contains("classifier")) {
      const json& k = j.at("classifier");
      check_keys(k, {"epochs", "validation_cap", "embedding_dim", "learning_rate"}, "classifier");
      c.classifier.epochs = k.value("epochs", c.classifier.epochs);
      c.classifier.validation_cap = k.value("validation_cap", c.classifier.validation_cap);
      c.classifier.embedding_dim = k.value("embedding_dim", c.classifier.embedding_dim);
      c.classifier.learning_rate = k.value("learning_rate", c.classifier.learning_rate);
    }
    if (j.contains("seeds")) {
      c.seeds.clear();
      for (const auto& s : j.at("seeds")) c.seeds.push_back(parse_seed(s));
    }
    if (j.contains("output_dir")) {
      c.output_dir = resolve(j.at("output_dir").get<std::string>(), base);
    }
    c.require_unique_authors = j.value("require_unique_authors", c.require_unique_authors);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed config: ") + e.what(), {});
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("config " + path.string() + " is not valid JSON: " + e.what(), {});
  }
  return ExperimentConfig::from_json(j, path.parent_path());
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& config) {
  json j = config.to_json();
  // Where a run lands does not change what it computes.
  j.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace dpsyn::experiment
