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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dpsyn/data/prompt.hpp"
#include "dpsyn/data/records.hpp"
#include "dpsyn/data/transforms.hpp"
#include "dpsyn/errors.hpp"
#include "dpsyn/privacy/audit.hpp"

namespace dpsyn::data {
namespace {

namespace fs = std::filesystem;

class TempFile {
 public:
  explicit TempFile(const std::string& name) : path_(fs::temp_directory_path() / name) {}
  ~TempFile() { fs::remove(path_); }
  const fs::path& path() const { return path_; }
  void write(const std::string& content) const { std::ofstream(path_) << content; }

 private:
  fs::path path_;
};

Dataset with_counts(const std::vector<std::pair<std::string, int>>& counts) {
  Dataset d;
  for (const auto& [label, n] : counts) {
    for (int i = 0; i < n; ++i) d.push_back({label + " text " + std::to_string(i), label, {}});
  }
  return d;
}

std::multiset<std::string> texts(const Dataset& d) {
  std::multiset<std::string> out;
  for (const auto& r : d) out.insert(r.label + "|" + r.text);
  return out;
}

TEST(JsonlTest, EmptyFileIsEmpty) {
  TempFile f("dpsyn_empty.jsonl");
  f.write("");
  EXPECT_TRUE(load_jsonl(f.path()).empty());
}

TEST(JsonlTest, MissingLabelNamesTheLine) {
  TempFile f("dpsyn_bad.jsonl");
  f.write(
      "{\"text\": \"fine\", \"label\": \"a\"}\n"
      "{\"text\": \"no label\"}\n"
      "\n"
      "not json\n"
      "{\"text\": \"ok\", \"label\": \"b\", \"author_id\": \"x\"}\n");
  try {
    load_jsonl(f.path());
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.lines(), (std::vector<std::size_t>{2, 4}));
    EXPECT_NE(std::string(e.what()).find("2, 4"), std::string::npos);
  }
}

TEST(JsonlTest, MissingFileIsAnIoError) {
  EXPECT_THROW(load_jsonl("/nonexistent/dir/file.jsonl"), IoError);
}

TEST(JsonlTest, RoundTripOfAHundredRecords) {
  Dataset d;
  for (int i = 0; i < 100; ++i) {
    LabeledText r{"record \"" + std::to_string(i) + "\" caf\u00e9 \\ tab", i % 3 ? "a" : "b", {}};
    if (i % 4 == 0) r.author_id = "author " + std::to_string(i / 8);
    d.push_back(r);
  }
  TempFile f("dpsyn_roundtrip.jsonl");
  write_jsonl(f.path(), d);
  EXPECT_EQ(load_jsonl(f.path()), d);
}

TEST(JsonlTest, TextIsNormalized) {
  TempFile f("dpsyn_norm.jsonl");
  f.write("{\"text\": \"  two\\t words \\n\", \"label\": \"a\"}\n{\"text\": \"   \", \"label\": \"a\"}\n");
  try {
    load_jsonl(f.path());
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.lines(), std::vector<std::size_t>{2});
  }
  EXPECT_EQ(normalize_text("  two\t words \n"), "two words");
}

TEST(PromptTest, BuiltinTemplates) {
  EXPECT_EQ(render_prompt(builtin_template("webmd"), "great"), "write a great medicine review: ");
  EXPECT_EQ(render_prompt(builtin_template("swmh"), "anxiety"),
            "write a post to the anxiety community: ");
  EXPECT_EQ(render_prompt(builtin_template("spam"), "non-spam"), "write a non-spam e-mail:");
  EXPECT_EQ(render_prompt(builtin_template("thumbs_up"), "hot"),
            "write a hot negative app review: ");
  EXPECT_THROW(render_prompt(builtin_template("webmd"), "meh"), UnknownLabelError);
  EXPECT_THROW(builtin_template("imdb"), std::invalid_argument);
}

TEST(PromptTest, TotalAndInjective) {
  for (const char* name : {"spam", "swmh", "thumbs_up", "webmd", "toy"}) {
    const auto t = builtin_template(name);
    std::set<std::string> rendered;
    for (const auto& l : t.labels()) rendered.insert(render_prompt(t, l));
    EXPECT_EQ(rendered.size(), t.labels().size()) << name;
  }
}

TEST(PromptTest, TemplateFiles) {
  TempFile f("dpsyn_template.json");
  f.write(R"({"pattern": "write a {label} note:", "label_phrases": {"1": "short", "2": "long"}})");
  const auto t = load_template(f.path());
  EXPECT_EQ(render_prompt(t, "2"), "write a long note:");
  EXPECT_EQ(PromptTemplate::from_json(t.to_json()).label_phrases, t.label_phrases);
  f.write(R"({"pattern": "no slot", "label_phrases": {"1": "x"}})");
  EXPECT_THROW(load_template(f.path()), std::invalid_argument);
}

TEST(BalanceTest, Examples) {
  Rng rng(1);
  const auto same = balance_labels(with_counts({{"A", 10}, {"B", 10}}), {"A", "B"}, rng);
  EXPECT_EQ(same.size(), 20u);
  const auto down = balance_labels(with_counts({{"A", 100}, {"B", 10}}), {"A", "B"}, rng);
  EXPECT_EQ(label_counts(down), (std::map<std::string, std::size_t>{{"A", 10}, {"B", 10}}));
  EXPECT_THROW(balance_labels(with_counts({{"A", 3}}), {"A", "B"}, rng), DomainError);
  EXPECT_THROW(balance_labels(with_counts({{"C", 3}}), {"A"}, rng), UnknownLabelError);
}

TEST(BalanceTest, ThumbsUpShapedFixture) {
  const auto d = with_counts({{"mild", 48000},
                              {"notable", 30933},
                              {"concerning", 41000},
                              {"serious", 35500},
                              {"hot", 60000}});
  Rng rng(2);
  const auto b =
      balance_labels(d, {"mild", "notable", "concerning", "serious", "hot"}, rng);
  for (const auto& [label, n] : label_counts(b)) EXPECT_EQ(n, 30933u) << label;
}

TEST(BalanceTest, DeterministicAndASubset) {
  const auto d = with_counts({{"A", 50}, {"B", 20}, {"C", 35}});
  Rng a(7), b(7);
  const auto x = balance_labels(d, {"A", "B", "C"}, a);
  EXPECT_EQ(x, balance_labels(d, {"A", "B", "C"}, b));
  const auto all = texts(d);
  for (const auto& r : x) EXPECT_TRUE(all.count(r.label + "|" + r.text));
}

TEST(SplitTest, Examples) {
  const auto s = split(with_counts({{"A", 50}, {"B", 50}}), {0.8, 0.2}, 1);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.test.size(), 20u);
  EXPECT_TRUE(s.validation.empty());
  const auto t = split(with_counts({{"A", 600}, {"B", 400}}), {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(t.train.size(), 800u);
  EXPECT_EQ(t.validation.size(), 100u);
  EXPECT_EQ(t.test.size(), 100u);
  EXPECT_EQ(label_counts(t.test)["A"], 60u);
  EXPECT_THROW(split(with_counts({{"A", 2}}), {0.8, 0.1, 0.1}, 1), DomainError);
  EXPECT_THROW(split(with_counts({{"A", 20}}), {0.8, 0.3}, 1), DomainError);
}

TEST(SplitTest, DeterministicDisjointAndComplete) {
  const auto d = with_counts({{"A", 37}, {"B", 91}, {"C", 12}});
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto s = split(d, {0.7, 0.2, 0.1}, seed);
    const auto again = split(d, {0.7, 0.2, 0.1}, seed);
    EXPECT_EQ(s.train, again.train);
    EXPECT_EQ(s.test, again.test);
    Dataset all = s.train;
    all.insert(all.end(), s.validation.begin(), s.validation.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    EXPECT_EQ(texts(all), texts(d));
    const double n = 140;
    EXPECT_LE(std::abs(s.train.size() - 0.7 * n), 1.0);
    EXPECT_LE(std::abs(s.validation.size() - 0.2 * n), 1.0);
    EXPECT_LE(std::abs(s.test.size() - 0.1 * n), 1.0);
    EXPECT_EQ(s.split_seed, seed);
  }
  EXPECT_NE(split(d, {0.5, 0.5}, 1).train, split(d, {0.5, 0.5}, 2).train);
}

TEST(ToyDatasetTest, SizesAndAuthors) {
  ToySpec spec;
  Rng rng(1);
  const auto d = make_toy_dataset(spec, rng);
  EXPECT_EQ(d.size(), 1000u);
  EXPECT_EQ(privacy::audit_author_contributions(d).k_max, 1);
  spec.records_per_author = 2;
  Rng rng2(1);
  EXPECT_EQ(privacy::audit_author_contributions(make_toy_dataset(spec, rng2)).k_max, 2);
}

TEST(ToyDatasetTest, LabelSpecificWordsSeparatePerfectly) {
  ToySpec spec;
  spec.shared_rate = 0.6;
  Rng rng(3);
  const auto d = make_toy_dataset(spec, rng);
  // Frequency rule: predict the label whose private words occur most often.
  int correct = 0;
  for (const auto& r : d) {
    std::map<std::string, int> votes;
    std::istringstream in(r.text);
    std::string w;
    while (in >> w) {
      for (const auto& l : spec.labels) {
        if (w.rfind(l + "-", 0) == 0) ++votes[l];
      }
    }
    const auto best = std::max_element(votes.begin(), votes.end(), [](auto& a, auto& b) {
      return a.second < b.second;
    });
    correct += best != votes.end() && best->first == r.label;
    const auto n = std::count(r.text.begin(), r.text.end(), ' ') + 1;
    EXPECT_GE(n, spec.min_length);
    EXPECT_LE(n, spec.max_length);
  }
  EXPECT_EQ(correct, static_cast<int>(d.size()));
}

TEST(ToyDatasetTest, SpecJsonAndDeterminism) {
  ToySpec spec;
  spec.labels = {"x", "y", "z"};
  spec.n_per_label = 7;
  EXPECT_EQ(ToySpec::from_json(spec.to_json()).to_json(), spec.to_json());
  Rng a(5), b(5);
  EXPECT_EQ(make_toy_dataset(spec, a), make_toy_dataset(spec, b));
  spec.labels = {"x", "x"};
  EXPECT_THROW(spec.validate(), DomainError);
}

}  // namespace
}  // namespace dpsyn::data
