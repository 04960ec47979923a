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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dpsyn/errors.hpp"
#include "dpsyn/experiment/runner.hpp"

namespace dpsyn::experiment {
namespace {

using nlohmann::json;

// Sets a dotted key ("model.kind") inside a JSON object.
void set_path(json& j, const std::string& dotted, const json& value) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::string epsilon_label(double epsilon) {
  if (!std::isfinite(epsilon)) return "inf";
  std::ostringstream out;
  out << epsilon;
  return out.str();
}

std::string cell_name(const ExperimentConfig& c) {
  return c.dataset.name + "-" + c.model_kind + "-eps" + epsilon_label(c.training.epsilon);
}

std::string mean_std(const eval::MetricSummary& s, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f (±%.*f)", digits, s.mean, digits, s.std);
  return buf;
}

std::string failure_kind(const std::exception& e) {
  if (dynamic_cast<const UnsatisfiableError*>(&e)) return "calibration";
  if (dynamic_cast<const SchemaError*>(&e)) return "schema";
  if (dynamic_cast<const PrivateDataError*>(&e)) return "private pretraining corpus";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const UnknownLabelError*>(&e)) return "unknown label";
  return "error";
}

}  // namespace

SweepSpec sweep_from_json(const json& j, const std::filesystem::path& base_dir) {
  SweepSpec spec;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key != "output_dir" && key != "base" && key != "grid" && key != "cells") {
        throw SchemaError("unknown key \"" + key + "\" in sweep", {});
      }
    }
    if (j.contains("output_dir")) {
      const std::filesystem::path p = j.at("output_dir").get<std::string>();
      spec.output_dir = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    }
    const json base = j.value("base", json::object());
    std::vector<json> patches{json::object()};
    if (j.contains("grid")) {
      // Cartesian product in key order, later keys varying fastest.
      for (const auto& [key, values] : j.at("grid").items()) {
        if (!values.is_array() || values.empty()) {
          throw SchemaError("grid entry \"" + key + "\" must be a non-empty list", {});
        }
        std::vector<json> next;
        for (const auto& p : patches) {
          for (const auto& v : values) {
            json q = p;
            set_path(q, key, v);
            next.push_back(std::move(q));
          }
        }
        patches = std::move(next);
      }
    }
    if (j.contains("cells")) {
      std::vector<json> next;
      for (const auto& p : patches) {
        for (const auto& cell : j.at("cells")) {
          json q = p;
          q.merge_patch(cell);
          next.push_back(std::move(q));
        }
      }
      patches = std::move(next);
    }
    for (const auto& p : patches) {
      json merged = base;
      merged.merge_patch(p);
      merged.erase("output_dir");
      auto cell = ExperimentConfig::from_json(merged, base_dir);
      cell.output_dir = spec.output_dir / cell_name(cell);
      spec.cells.push_back(std::move(cell));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed sweep: ") + e.what(), {});
  }
  if (spec.cells.empty()) throw SchemaError("sweep has no cells", {});
  return spec;
}

SweepSpec load_sweep(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read sweep " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("sweep " + path.string() + " is not valid JSON: " + e.what(), {});
  }
  return sweep_from_json(j, path.parent_path());
}

std::string format_table(const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  out << "| Dataset | Model | ε | Acc | MF1 | PPL |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& c : cells) {
    out << "| " << c.dataset << " | " << c.model << " | " << epsilon_label(c.epsilon) << " | ";
    if (!c.outcome) {
      out << "failed: " << c.failure << " | failed: " << c.failure << " | failed: " << c.failure
          << " |\n";
      continue;
    }
    const auto& r = c.outcome->report;
    out << mean_std(r.accuracy, 3) << " | " << mean_std(r.macro_f1, 3) << " | "
        << (r.perplexity ? mean_std(*r.perplexity, 2) : std::string("n/a")) << " |\n";
  }
  return out.str();
}

SweepResult sweep(const SweepSpec& spec, const RunOptions& options) {
  if (spec.cells.empty()) throw SchemaError("sweep has no cells", {});
  SweepResult result;
  for (const auto& config : spec.cells) {
    SweepCell cell{config.dataset.name, config.model_kind, config.training.epsilon, {}, {}, 0.0};
    if (options.log) options.log("cell " + cell_name(config));
    const auto start = std::chrono::steady_clock::now();
    try {
      cell.outcome = run_experiment(config, options);
    } catch (const std::exception& e) {
      cell.failure = failure_kind(e);
      if (options.log) options.log("cell failed (" + cell.failure + "): " + e.what());
    }
    cell.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.cells.push_back(std::move(cell));
  }
  result.table = format_table(result.cells);
  std::filesystem::create_directories(spec.output_dir);
  std::ofstream out(spec.output_dir / "table.md");
  out << result.table;
  if (!out) throw IoError("failed writing " + (spec.output_dir / "table.md").string());
  return result;
}

}  // namespace dpsyn::experiment
