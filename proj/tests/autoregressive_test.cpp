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

#include "dpsyn/models/autoregressive.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "support/gradient_check.hpp"

namespace dpsyn::models {
namespace {

using nn::Vector;

ArConfig tiny_config() {
  ArConfig c;
  c.vocab_size = 11;
  c.embedding_dim = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  c.ff_dim = 16;
  c.max_sequence_length = 12;
  return c;
}

TokenSequence random_sequence(std::mt19937& rng, int vocab, int length) {
  std::uniform_int_distribution<int> tok(kNumSpecialTokens, vocab - 1);
  TokenSequence s;
  for (int i = 0; i < length; ++i) s.ids.push_back(tok(rng));
  s.instruction_length = 2;
  return s;
}

const Vocabulary& toy_vocab() {
  static const Vocabulary v =
      Vocabulary::build({"write a good review:", "tasty fresh lovely bland stale"});
  return v;
}

TEST(EncodeTest, EmptyTextIsInstructionSeparatorEos) {
  const auto& v = toy_vocab();
  const auto s = encode(v, "write a good review:", "", 32);
  ASSERT_EQ(s.length(), 6);
  EXPECT_EQ(s.instruction_length, 5);
  EXPECT_EQ(s.ids[4], kSepId);
  EXPECT_EQ(s.ids[5], kEosId);
}

TEST(EncodeTest, DecodeInvertsEncodeForInVocabularyText) {
  const auto& v = toy_vocab();
  const std::string text = "tasty fresh lovely tasty";
  EXPECT_EQ(decode_text(v, encode(v, "write a good review:", text, 32)), text);
}

TEST(EncodeTest, UnknownWordMapsToUnknownId) {
  const auto& v = toy_vocab();
  const auto s = encode(v, "write", "tasty zzz", 32);
  EXPECT_EQ(s.ids[2], v.id("tasty"));
  EXPECT_EQ(s.ids[3], kUnkId);
}

TEST(EncodeTest, TruncationKeepsTheInstruction) {
  const auto& v = toy_vocab();
  const auto s = encode(v, "write a good review:", "tasty fresh lovely bland stale", 7);
  EXPECT_EQ(s.length(), 7);
  EXPECT_EQ(s.instruction_length, 5);
  EXPECT_EQ(s.ids[5], v.id("tasty"));
  EXPECT_THROW(encode(v, "write a good review:", "x", 4), std::length_error);
}

TEST(VocabularyTest, SpecialsAndJson) {
  const auto& v = toy_vocab();
  EXPECT_EQ(v.token(kPadId), "<pad>");
  EXPECT_EQ(v.token(kSepId), "<sep>");
  EXPECT_EQ(Vocabulary::from_json(v.to_json()), v);
  EXPECT_THROW(Vocabulary::from_json(nlohmann::json::array({"a", "b"})), std::invalid_argument);
}

TEST(NllLossTest, UniformLogitsGiveLogV) {
  AutoregressiveLm model(tiny_config());
  Vector p = model.initial_parameters(3);
  model.layout().view(p, model.layout().find("out.weight")).setZero();
  std::mt19937 rng(1);
  const auto losses = model.nll_loss(p, {random_sequence(rng, 11, 5), random_sequence(rng, 11, 9)});
  for (double l : losses) EXPECT_NEAR(l, std::log(11.0), 1e-12);
}

TEST(NllLossTest, CertainPredictionGivesZero) {
  ArConfig c = tiny_config();
  c.mask_instruction = true;
  AutoregressiveLm model(c);
  Vector p = model.initial_parameters(3);
  model.layout().view(p, model.layout().find("out.weight")).setZero();
  model.layout().view(p, model.layout().find("out.bias"))(7, 0) = 1000.0;
  TokenSequence s{{5, kSepId, 7}, 2};
  EXPECT_EQ(model.sequence_loss(p, s, nullptr), 0.0);
}

TEST(NllLossTest, BatchEqualsOneAtATime) {
  AutoregressiveLm model(tiny_config());
  const Vector p = model.initial_parameters(5);
  std::mt19937 rng(2);
  std::vector<TokenSequence> batch;
  for (int len : {3, 7, 12, 5}) batch.push_back(random_sequence(rng, 11, len));
  const auto joint = model.nll_loss(p, batch);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    EXPECT_NEAR(joint[i], model.sequence_loss(p, batch[i], nullptr), 1e-6);
  }
}

TEST(NllLossTest, PadIdInsideSequenceStillScores) {
  AutoregressiveLm model(tiny_config());
  const Vector p = model.initial_parameters(5);
  const TokenSequence inner{{5, kPadId, 7, kPadId, 9}, 1};
  const TokenSequence longer{{5, 6, 7, 8, 9, 10, 6, 5}, 1};
  const auto joint = model.nll_loss(p, {inner, longer});
  EXPECT_NEAR(joint[0], model.sequence_loss(p, inner, nullptr), 1e-12);
  EXPECT_NEAR(joint[1], model.sequence_loss(p, longer, nullptr), 1e-12);
}

TEST(CausalityTest, LogitsIgnoreFutureTokens) {
  AutoregressiveLm model(tiny_config());
  const Vector p = model.initial_parameters(9);
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> tok(kNumSpecialTokens, 10);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = random_sequence(rng, 11, 10);
    const auto base = model.logits(p, s.ids);
    const int cut = trial % 9;
    for (int j = cut + 1; j < 10; ++j) s.ids[j] = tok(rng);
    const auto perturbed = model.logits(p, s.ids);
    EXPECT_TRUE(base.topRows(cut + 1).isApprox(perturbed.topRows(cut + 1), 0.0) ||
                (base.topRows(cut + 1) - perturbed.topRows(cut + 1)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST(GradientTest, MatchesCentralDifferences) {
  for (bool mask : {false, true}) {
    ArConfig c = tiny_config();
    c.mask_instruction = mask;
    AutoregressiveLm model(c);
    const Vector p = model.initial_parameters(11);
    std::mt19937 rng(6);
    const auto s = random_sequence(rng, 11, 9);
    Vector grad;
    model.sequence_loss(p, s, &grad);
    const auto r = testing::check_gradient(
        [&](const Vector& x) { return model.sequence_loss(x, s, nullptr); }, p, grad, 100, 17);
    EXPECT_EQ(r.checked, 100);
    EXPECT_LT(r.max_relative_error, 1e-4) << "worst index " << r.worst_index;
  }
}

TEST(GradientTest, SinusoidalPositionsHaveNoPositionalTensor) {
  ArConfig c = tiny_config();
  c.sinusoidal_positions = true;
  AutoregressiveLm model(c);
  EXPECT_EQ(model.layout().find("pos_emb"), -1);
  EXPECT_TRUE((model.layout().private_trainable_mask().array() == 1.0).all());
  AutoregressiveLm learned(tiny_config());
  EXPECT_LT(learned.layout().private_trainable_mask().sum(), learned.num_parameters());
}

TEST(OverfitTest, PlainGradientDescentShrinksLoss) {
  ArConfig c = tiny_config();
  c.embedding_dim = 16;
  c.ff_dim = 32;
  c.num_heads = 2;
  AutoregressiveLm model(c);
  Vector p = model.initial_parameters(1);
  std::mt19937 rng(8);
  std::vector<TokenSequence> batch;
  for (int i = 0; i < 16; ++i) batch.push_back(random_sequence(rng, 11, 8));
  auto mean_loss = [&](const Vector& x, Vector* g) {
    double total = 0.0;
    if (g != nullptr) g->setZero(x.size());
    Vector gi;
    for (const auto& s : batch) {
      total += model.sequence_loss(x, s, g != nullptr ? &gi : nullptr);
      if (g != nullptr) *g += gi;
    }
    if (g != nullptr) *g /= batch.size();
    return total / batch.size();
  };
  const double initial = mean_loss(p, nullptr);
  Vector g;
  for (int step = 0; step < 200; ++step) {
    mean_loss(p, &g);
    p -= 0.5 * g;
  }
  EXPECT_LT(mean_loss(p, nullptr), 0.1 * initial);
}

TEST(GenerateTest, ZeroBudgetIsEmpty) {
  AutoregressiveLm model(tiny_config());
  const Vector p = model.initial_parameters(1);
  Vocabulary v = Vocabulary::build({"a b c d e f g"});
  Rng rng(1);
  EXPECT_EQ(generate(model, p, v, "a", {0, 1.0, 5}, rng), "");
}

TEST(GenerateTest, GreedyIsSeedIndependentAndValid) {
  AutoregressiveLm model(tiny_config());
  const Vector p = model.initial_parameters(2);
  std::vector<TokenId> first;
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const auto ids = model.sample(p, {5, kSepId}, {8, 1.0, 1}, rng);
    if (seed == 1) first = ids;
    EXPECT_EQ(ids, first);
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    for (TokenId id : model.sample(p, {5, kSepId}, {10, 1.0, 11}, rng)) {
      EXPECT_GE(id, 0);
      EXPECT_LT(id, 11);
      EXPECT_NE(id, kPadId);
    }
  }
}

TEST(GenerateTest, RejectsBadSamplingOptions) {
  AutoregressiveLm model(tiny_config());
  const Vector p = model.initial_parameters(2);
  Rng rng(1);
  EXPECT_THROW(model.sample(p, {5}, {4, 0.0, 3}, rng), std::invalid_argument);
  EXPECT_THROW(model.sample(p, {5}, {4, 1.0, 0}, rng), std::invalid_argument);
  EXPECT_THROW(model.sample(p, {5}, {4, 1.0, 12}, rng), std::invalid_argument);
}

TEST(GenerateTest, MemorizedStringComesBackUnderGreedyDecoding) {
  const Vocabulary v = Vocabulary::build({"say the magic words please now"});
  ArConfig c = tiny_config();
  c.vocab_size = v.size();
  c.embedding_dim = 16;
  c.ff_dim = 32;
  AutoregressiveLm model(c);
  Vector p = model.initial_parameters(4);
  const auto s = encode(v, "say", "the magic words please", c.max_sequence_length);
  Vector g;
  for (int step = 0; step < 300; ++step) {
    model.sequence_loss(p, s, &g);
    p -= 0.3 * g;
  }
  Rng rng(99);
  EXPECT_EQ(generate(model, p, v, "say", {10, 1.0, 1}, rng), "the magic words please");
}

}  // namespace
}  // namespace dpsyn::models
