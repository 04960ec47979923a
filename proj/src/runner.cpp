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

#include "dpsyn/experiment/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>

#include "dpsyn/dpsgd/engine.hpp"
#include "dpsyn/errors.hpp"
#include "dpsyn/eval/classifier.hpp"
#include "dpsyn/eval/corpus.hpp"
#include "dpsyn/models/autoregressive.hpp"
#include "dpsyn/models/diffusion.hpp"
#include "dpsyn/privacy/accountant.hpp"

namespace dpsyn::experiment {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Writes files under a run directory and remembers each relative path for
// the manifest.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }

  fs::path claim(const fs::path& relative) {
    const fs::path full = root_ / relative;
    fs::create_directories(full.parent_path());
    files_.insert(relative.generic_string());
    return full;
  }

  void write_json(const fs::path& relative, const json& j) {
    std::ofstream out(claim(relative));
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + (root_ / relative).string());
  }

  std::vector<std::string> files() const { return {files_.begin(), files_.end()}; }

 private:
  fs::path root_;
  std::set<std::string> files_;
};

void say(const RunOptions& options, const std::string& line) {
  if (options.log) options.log(line);
}

data::Dataset load_source(const CorpusSource& source, std::uint64_t seed, std::uint64_t tag) {
  if (source.path) return data::load_jsonl(*source.path);
  Rng rng = make_rng(seed, {tag});
  return data::make_toy_dataset(*source.toy, rng);
}

json budget_json(const privacy::PrivacyBudget& b) {
  return {{"epsilon", privacy::epsilon_to_json(b.epsilon)}, {"delta", b.delta}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(); }

// Instruction for a public record; labels outside the template get none.
std::string instruction_for(const data::PromptTemplate& tmpl, const std::string& label) {
  return tmpl.label_phrases.count(label) ? data::render_prompt(tmpl, label) : std::string();
}

// Generator-side state shared by both model kinds.
struct TrainedModel {
  std::unique_ptr<eval::TextGenerator> generator;
  dpsgd::TrainResult result;
  double validation_loss = 0.0;
  dpsgd::Checkpoint checkpoint;
  std::optional<dpsgd::Checkpoint> pretrained;
};

dpsgd::DpSgdConfig dpsgd_config(const TrainingConfig& t, std::size_t n) {
  auto c = dpsgd::DpSgdConfig::for_dataset(n, std::min<double>(t.expected_lot_size, n),
                                           t.epochs, t.clip_norm);
  if (t.steps) c.num_steps = *t.steps;
  return c;
}

privacy::PrivacyBudget target_budget(const ExperimentConfig& config, std::size_t n) {
  if (!std::isfinite(config.training.epsilon)) return privacy::PrivacyBudget::non_private();
  return {config.training.epsilon,
          config.training.delta ? *config.training.delta
                                : privacy::default_delta(static_cast<std::int64_t>(n))};
}

dpsgd::TrainOptions train_options(const ExperimentConfig& config, std::uint64_t seed,
                                  std::ofstream& log) {
  dpsgd::TrainOptions o;
  o.learning_rate = config.training.learning_rate;
  o.seed = seed;
  o.on_step = [&log](const dpsgd::StepLog& entry) { log << dpsgd::to_json(entry).dump() << '\n'; };
  return o;
}

json train_provenance(const dpsgd::TrainResult& r, std::uint64_t seed) {
  return {{"seed", seed},
          {"realized", budget_json(r.realized)},
          {"dpsgd", r.config.to_json()}};
}

// Owns the models so generators can hold references to them.
struct ModelHolder {
  std::unique_ptr<models::AutoregressiveLm> ar;
  std::unique_ptr<models::DiffusionLm> diffusion;
};

TrainedModel train_autoregressive(const ExperimentConfig& config, const PreparedData& prepared,
                                  std::uint64_t seed, ModelHolder& holder, std::ofstream& log) {
  json arch = models::ArConfig{}.to_json();
  arch.merge_patch(config.architecture);
  arch["vocab_size"] = prepared.vocab.size();
  holder.ar = std::make_unique<models::AutoregressiveLm>(models::ArConfig::from_json(arch));
  const auto& model = *holder.ar;
  const int max_len = model.config().max_sequence_length;
  const auto& tmpl = config.dataset.prompt;

  std::vector<models::TokenSequence> train_seqs, val_seqs;
  for (const auto& r : prepared.split.train) {
    train_seqs.push_back(
        models::encode(prepared.vocab, data::render_prompt(tmpl, r.label), r.text, max_len));
  }
  for (const auto& r : prepared.split.validation) {
    val_seqs.push_back(
        models::encode(prepared.vocab, data::render_prompt(tmpl, r.label), r.text, max_len));
  }
  const std::size_t n = train_seqs.size();
  const models::ArObjective objective(model, std::move(train_seqs));

  TrainedModel out;
  out.result = dpsgd::train(objective, model.initial_parameters(derive_seed(seed, {stream::kInit})),
                            dpsgd_config(config.training, n), target_budget(config, n),
                            train_options(config, seed, log));
  const auto& params = out.result.state.parameters;
  double total = 0.0;
  for (const auto& s : val_seqs) total += model.sequence_loss(params, s, nullptr);
  out.validation_loss = val_seqs.empty() ? 0.0 : total / val_seqs.size();
  out.generator = std::make_unique<eval::AutoregressiveGenerator>(model, params, prepared.vocab,
                                                                  config.sampling);
  out.checkpoint = {"autoregressive", out.result.state,
                    {{"config", model.config().to_json()}, {"vocabulary", prepared.vocab.to_json()}},
                    train_provenance(out.result, seed)};
  return out;
}

TrainedModel train_diffusion(const ExperimentConfig& config, const PreparedData& prepared,
                             std::uint64_t seed, ModelHolder& holder, std::ofstream& log,
                             const RunOptions& options) {
  json arch = models::DiffusionConfig{}.to_json();
  arch.merge_patch(config.architecture);
  arch["vocab_size"] = prepared.vocab.size();
  holder.diffusion =
      std::make_unique<models::DiffusionLm>(models::DiffusionConfig::from_json(arch));
  const auto& model = *holder.diffusion;
  const int length = model.config().max_sequence_length;
  const auto& tmpl = config.dataset.prompt;

  std::vector<models::DiffusionExample> train_examples, val_examples;
  for (const auto& r : prepared.split.train) {
    train_examples.push_back(models::encode_seq2seq(
        prepared.vocab, data::render_prompt(tmpl, r.label), r.text, length));
  }
  for (const auto& r : prepared.split.validation) {
    val_examples.push_back(models::encode_seq2seq(
        prepared.vocab, data::render_prompt(tmpl, r.label), r.text, length));
  }

  TrainedModel out;
  nn::Vector init;
  if (config.pretraining.enabled) {
    models::TokenCorpus corpus;
    corpus.is_private = false;
    for (const auto& r : *prepared.public_texts) {
      corpus.sequences.push_back(
          models::encode_seq2seq(prepared.vocab, instruction_for(tmpl, r.label), r.text, length)
              .ids);
    }
    auto pretrain = config.pretraining.options;
    pretrain.seed = derive_seed(seed, {stream::kPretrain});
    say(options, "  span pretraining for " + std::to_string(pretrain.steps) + " steps");
    out.pretrained = models::span_pretrain(model, corpus, pretrain);
    out.pretrained->model["vocabulary"] = prepared.vocab.to_json();
    init = out.pretrained->state.parameters;
  } else {
    init = model.initial_parameters(derive_seed(seed, {stream::kInit}));
  }

  const std::size_t n = train_examples.size();
  const models::DiffusionObjective objective(model, std::move(train_examples));
  out.result = dpsgd::train(objective, std::move(init), dpsgd_config(config.training, n),
                            target_budget(config, n), train_options(config, seed, log));
  const auto& params = out.result.state.parameters;
  // Draws depend on the data seed only, so runs that differ in model or
  // training see identical validation noise.
  double total = 0.0;
  for (std::size_t i = 0; i < val_examples.size(); ++i) {
    const auto draw = model.draw_noise(
        val_examples[i], derive_seed(config.dataset.seed, {stream::kValidation, i}));
    total += model.example_loss(params, val_examples[i], draw, nullptr);
  }
  out.validation_loss = val_examples.empty() ? 0.0 : total / val_examples.size();
  out.generator = std::make_unique<eval::DiffusionGenerator>(model, params, prepared.vocab,
                                                             config.clamp);
  out.checkpoint = {"diffusion", out.result.state,
                    {{"config", model.config().to_json()},
                     {"schedule", model.schedule().to_json()},
                     {"vocabulary", prepared.vocab.to_json()}},
                    train_provenance(out.result, seed)};
  out.checkpoint.extra["pretrained"] = config.pretraining.enabled;
  return out;
}

// Non-private judge trained on public text only: <sep> text <eos>.
struct Reference {
  std::unique_ptr<models::AutoregressiveLm> model;
  dpsgd::TrainResult result;
};

Reference train_reference(const ExperimentConfig& config, const PreparedData& prepared) {
  json arch = models::ArConfig{}.to_json();
  arch.merge_patch(config.reference.architecture);
  arch["vocab_size"] = prepared.vocab.size();
  Reference ref;
  ref.model = std::make_unique<models::AutoregressiveLm>(models::ArConfig::from_json(arch));
  std::vector<models::TokenSequence> seqs;
  for (const auto& r : *prepared.public_texts) {
    seqs.push_back(models::encode(prepared.vocab, "", r.text,
                                  ref.model->config().max_sequence_length));
  }
  const std::size_t n = seqs.size();
  const models::ArObjective objective(*ref.model, std::move(seqs));
  auto cfg = dpsgd::DpSgdConfig::for_dataset(n, std::min<double>(config.reference.batch_size, n),
                                             config.reference.epochs);
  dpsgd::TrainOptions o;
  o.learning_rate = config.reference.learning_rate;
  o.seed = derive_seed(config.dataset.seed, {stream::kReference});
  ref.result = dpsgd::train(objective, ref.model->initial_parameters(o.seed), cfg,
                            privacy::PrivacyBudget::non_private(), o);
  return ref;
}

json accountant_json(const dpsgd::TrainResult& r) {
  const auto& curve = r.state.accountant_curve;
  const auto eps = privacy::to_epsilon_delta(curve, r.realized.delta);
  return {{"noise_multiplier", r.config.noise_multiplier},
          {"sample_rate", r.config.sample_rate},
          {"num_steps", r.config.num_steps},
          {"delta", r.realized.delta},
          {"epsilon", eps.epsilon},
          {"best_order", eps.best_order},
          {"orders", curve.orders()},
          {"rdp", curve.values()}};
}

json seed_metrics_json(const SeedOutcome& s) {
  json epochs = json::array();
  for (const auto& e : s.classifier_epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"accuracy", e.accuracy}, {"macro_f1", e.macro_f1}});
  }
  return {{"seed", s.seed},
          {"accuracy", s.metrics.accuracy},
          {"macro_f1", s.metrics.macro_f1},
          {"perplexity", optional_number(s.metrics.perplexity)},
          {"validation_loss", s.validation_loss},
          {"best_epoch", s.best_epoch},
          {"classifier_epochs", epochs},
          {"failed_generations", s.failed_generations},
          {"realized", budget_json(s.realized)},
          {"noise_multiplier", s.noise_multiplier},
          {"warnings", s.warnings}};
}

void prepare_directory(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!overwrite) {
      throw IoError("output directory " + dir.string() + " is not empty (use overwrite)");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config) {
  config.validate();
  PreparedData p;
  const auto& ds = config.dataset;
  p.labels = ds.prompt.labels();
  data::Dataset all = load_source(ds.source, ds.seed, stream::kData);
  data::check_labels(all, p.labels);
  if (ds.balance) {
    Rng rng = make_rng(ds.seed, {stream::kBalance});
    all = data::balance_labels(all, p.labels, rng);
  }
  p.split = data::split(all, ds.split, ds.seed);

  if (!config.public_corpus.empty()) {
    p.public_texts = load_source(config.public_corpus, ds.seed, stream::kReference);
  } else if (ds.source.toy) {
    // A fresh draw of the same generator stands in for public text.
    Rng rng = make_rng(ds.seed, {stream::kReference});
    p.public_texts = data::make_toy_dataset(*ds.source.toy, rng);
  }

  std::vector<std::string> texts;
  for (const auto& l : p.labels) texts.push_back(data::render_prompt(ds.prompt, l));
  const data::Dataset& vocab_source = p.public_texts ? *p.public_texts : p.split.train;
  for (const auto& r : vocab_source) texts.push_back(r.text);
  p.vocab = models::Vocabulary::build(texts);
  p.vocabulary_is_public = p.public_texts.has_value();
  return p;
}

RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  RunOutcome outcome;
  outcome.directory = config.output_dir;
  outcome.config_hash = config_hash(config);
  const PreparedData prepared = prepare_data(config);
  const std::size_t n = prepared.split.train.size();
  outcome.train_size = n;
  say(options, "data: " + std::to_string(n) + " train / " +
                   std::to_string(prepared.split.validation.size()) + " validation / " +
                   std::to_string(prepared.split.test.size()) + " test, vocabulary " +
                   std::to_string(prepared.vocab.size()));

  // The audit precedes any training.
  outcome.audit = privacy::audit_author_contributions(prepared.split.train);
  const auto target = target_budget(config, n);
  const auto claimed = privacy::effective_budget(target, outcome.audit);
  if (config.require_unique_authors && outcome.audit.k_max > 1) {
    throw DomainError("require_unique_authors: an author contributes " +
                      std::to_string(outcome.audit.k_max) + " training records");
  }
  prepare_directory(config.output_dir, options.overwrite);
  ArtifactWriter writer(config.output_dir);
  writer.write_json("audit.json", privacy::to_json(claimed, outcome.audit));

  std::vector<std::string> run_warnings;
  if (!claimed.annotation.empty()) run_warnings.push_back(claimed.annotation);
  if (!prepared.vocabulary_is_public) {
    run_warnings.push_back("vocabulary built from the private training split");
  }

  std::optional<Reference> reference;
  if (config.reference.enabled && prepared.public_texts) {
    say(options, "training reference model");
    reference = train_reference(config, prepared);
    const dpsgd::Checkpoint ck{"autoregressive", reference->result.state,
                               {{"config", reference->model->config().to_json()},
                                {"vocabulary", prepared.vocab.to_json()}},
                               {{"role", "reference"}}};
    dpsgd::write_checkpoint(writer.claim("reference.json"), ck);
  } else if (config.reference.enabled) {
    run_warnings.push_back("no public corpus: perplexity not computed");
  }

  std::vector<eval::RunMetrics> runs;
  for (std::uint64_t seed : config.seeds) {
    say(options, "seed " + std::to_string(seed) + ": training " + config.model_kind);
    const fs::path dir = "seed-" + std::to_string(seed);
    std::ofstream log(writer.claim(dir / "train_log.jsonl"));
    ModelHolder holder;
    TrainedModel trained = config.model_kind == "autoregressive"
                               ? train_autoregressive(config, prepared, seed, holder, log)
                               : train_diffusion(config, prepared, seed, holder, log, options);
    log.close();
    if (trained.pretrained) {
      dpsgd::write_checkpoint(writer.claim(dir / "pretrained.json"), *trained.pretrained);
    }
    dpsgd::write_checkpoint(writer.claim(dir / "checkpoint.json"), trained.checkpoint);
    if (trained.result.realized.is_private()) {
      writer.write_json(dir / "accountant.json", accountant_json(trained.result));
    }

    SeedOutcome s;
    s.seed = seed;
    s.realized = trained.result.realized;
    s.noise_multiplier = trained.result.config.noise_multiplier;
    s.sample_rate = trained.result.config.sample_rate;
    s.num_steps = trained.result.config.num_steps;
    s.validation_loss = trained.validation_loss;
    const auto effective = privacy::effective_budget(s.realized, outcome.audit);
    writer.write_json(dir / "audit.json", privacy::to_json(effective, outcome.audit));
    if (seed == config.seeds.front()) outcome.effective = effective;

    say(options, "seed " + std::to_string(seed) + ": generating");
    eval::GenerationSpec gen = config.generation;
    gen.seed = derive_seed(seed, {stream::kGenerate});
    const auto corpus =
        eval::generate_corpus(*trained.generator, config.dataset.prompt, gen, s.realized);
    eval::write_corpus(writer.claim(dir / "corpus.jsonl"), corpus);
    s.failed_generations = corpus.num_failed();

    say(options, "seed " + std::to_string(seed) + ": evaluating");
    auto classifier =
        eval::train_downstream_classifier(corpus, prepared.split.validation, prepared.labels,
                                          derive_seed(seed, {stream::kClassifier}),
                                          config.classifier);
    s.classifier_epochs = classifier.epochs;
    s.best_epoch = classifier.best_epoch;
    s.warnings = classifier.warnings;
    const auto scores = eval::evaluate(*classifier.classifier, prepared.split.test);
    s.metrics = {seed, scores.accuracy, scores.macro_f1, std::nullopt};
    if (reference) {
      std::vector<std::string> texts;
      for (const auto& r : corpus.records) {
        if (!r.failed) texts.push_back(r.text);
      }
      const eval::AutoregressiveReference judge(*reference->model,
                                                reference->result.state.parameters,
                                                prepared.vocab);
      try {
        s.metrics.perplexity = eval::perplexity(judge, texts);
      } catch (const DomainError&) {
        s.warnings.push_back("perplexity undefined: every generated text is empty");
      }
    }
    writer.write_json(dir / "metrics.json", seed_metrics_json(s));
    runs.push_back(s.metrics);
    outcome.seeds.push_back(std::move(s));
  }
  outcome.report = eval::multi_seed_report(runs);

  // Byte-deterministic: no paths, clocks or host details.
  json per_seed = json::array();
  for (const auto& s : outcome.seeds) per_seed.push_back(seed_metrics_json(s));
  const json metrics = {
      {"config_hash", outcome.config_hash},
      {"dataset", config.dataset.name},
      {"model", config.model_kind},
      {"target", budget_json(target)},
      {"provenance",
       {{"realized", budget_json(outcome.seeds.front().realized)},
        {"effective", budget_json(outcome.effective.budget)},
        {"k_max", outcome.audit.k_max}}},
      {"report", eval::to_json(outcome.report)},
      {"per_seed", per_seed},
      {"warnings", run_warnings},
  };
  writer.write_json("metrics.json", metrics);

  json seeds_json = json::array();
  for (const auto& s : outcome.seeds) {
    seeds_json.push_back({{"seed", s.seed},
                          {"realized", budget_json(s.realized)},
                          {"noise_multiplier", s.noise_multiplier},
                          {"sample_rate", s.sample_rate},
                          {"num_steps", s.num_steps}});
  }
  auto files = writer.files();
  files.push_back("manifest.json");
  std::sort(files.begin(), files.end());
  const json manifest = {
      {"config_hash", outcome.config_hash},
      {"config", config.to_json()},
      {"seeds", config.seeds},
      {"realized", budget_json(outcome.seeds.front().realized)},
      {"effective", budget_json(outcome.effective.budget)},
      {"k_max", outcome.audit.k_max},
      {"per_seed", seeds_json},
      {"files", files},
      {"warnings", run_warnings},
  };
  writer.write_json("manifest.json", manifest);
  say(options, "wrote " + config.output_dir.string());
  return outcome;
}

}  // namespace dpsyn::experiment
