// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   test_decode.cpp
 * @brief  Beam search against exhaustive enumeration, greedy decoding,
 *         rescoring and the hypothesis file.
 */
#include <cmath>

#include "anchor/verify.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace anchor;

namespace {

using anchor::testing::kNegInf;
using anchor::testing::TableScorer;

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  while (e--) r *= b;
  return r;
}

ModelConfig small(Variant v) {
  ModelConfig c = tiny_model_config(v);
  c.init_scale = 0.8;
  return c;
}

}  // namespace

TEST(BeamSearch, TwoStepToyExample) {
  // ids: 2 = end, 3 = a, 4 = b.
  TableScorer s;
  s.V = 5;
  s.table[{}] = {kNegInf, kNegInf, kNegInf, std::log(0.6), std::log(0.4)};
  s.table[{3}] = {kNegInf, kNegInf, std::log(0.4), std::log(0.3), std::log(0.3)};
  s.table[{4}] = {kNegInf, kNegInf, std::log(0.9), std::log(0.05), std::log(0.05)};
  const Hypothesis g = greedy_decode(s, 2);
  EXPECT_EQ(g.symbols, (std::vector<std::size_t>{3}));
  EXPECT_NEAR(g.log_prob, std::log(0.24), 1e-12);
  for (std::size_t beam : {2u, 3u, 10u}) {
    const auto hyps = beam_search(s, beam, 2);
    EXPECT_EQ(hyps.front().symbols, (std::vector<std::size_t>{4})) << beam;
    EXPECT_TRUE(hyps.front().ended);
    EXPECT_NEAR(hyps.front().log_prob, std::log(0.36), 1e-12);
  }
}

TEST(BeamSearch, ExhaustiveOracle) {
  for (std::uint64_t k = 0; k < 60; ++k) {
    Rng rng(mix_seed(31, k));
    TableScorer s;
    s.V = 3 + rng.uniform_int(1, 3);  // 2..4 output symbols including end
    s.seed = mix_seed(32, k);
    const std::size_t outputs = s.V - 2;
    const std::size_t max_len = rng.uniform_int(1, 4);
    const auto oracle = anchor::testing::exhaustive_best(s, max_len);
    const std::size_t beam = std::max<std::size_t>(ipow(outputs, max_len), 4 * 4 * 4 * 4);
    const auto hyps = beam_search(s, beam, max_len);
    ASSERT_FALSE(hyps.empty());
    EXPECT_EQ(hyps.front().symbols, oracle.symbols) << "case " << k;
    EXPECT_EQ(hyps.front().ended, oracle.ended) << "case " << k;
    EXPECT_NEAR(hyps.front().log_prob, oracle.log_prob, 1e-12) << "case " << k;
    for (std::size_t i = 1; i < hyps.size(); ++i) EXPECT_GE(hyps[i - 1].log_prob, hyps[i].log_prob);
  }
}

TEST(BeamSearch, BeamOneIsGreedy) {
  for (std::uint64_t k = 0; k < 200; ++k) {
    Rng rng(mix_seed(41, k));
    TableScorer s;
    s.V = 3 + rng.uniform_int(1, 5);
    s.seed = k;
    const std::size_t max_len = rng.uniform_int(1, 8);
    const Hypothesis g = greedy_decode(s, max_len);
    const Hypothesis b = beam_search(s, 1, max_len).front();
    EXPECT_EQ(b.symbols, g.symbols) << k;
    EXPECT_EQ(b.ended, g.ended) << k;
    EXPECT_EQ(b.log_prob, g.log_prob) << k;
  }
}

TEST(BeamSearch, TopScoreMonotoneInBeam) {
  // Top-1 is non-decreasing in the beam size and reaches the optimum once
  // the beam covers every prefix.
  for (std::uint64_t k = 0; k < 100; ++k) {
    TableScorer s;
    s.V = 5;
    s.seed = mix_seed(51, k);
    const std::size_t max_len = 4;
    const double greedy = greedy_decode(s, max_len).log_prob;
    const auto oracle = anchor::testing::exhaustive_best(s, max_len);
    double prev = kNegInf;
    for (std::size_t beam = 1; beam <= 27; ++beam) {
      const double top = beam_search(s, beam, max_len).front().log_prob;
      EXPECT_GE(top, greedy - 1e-12) << k << " beam " << beam;
      EXPECT_GE(top, prev - 1e-12) << k << " beam " << beam;
      EXPECT_LE(top, oracle.log_prob + 1e-12);
      prev = top;
    }
    EXPECT_NEAR(prev, oracle.log_prob, 1e-12) << k;
  }
}

TEST(BeamSearch, HypothesisInvariants) {
  TableScorer s;
  s.V = 6;
  s.seed = 8;
  const auto hyps = beam_search(s, 5, 3);
  for (const auto &h : hyps) {
    for (auto y : h.symbols) EXPECT_FALSE(y == Vocabulary::kEos || !expandable(y));
    EXPECT_LE(h.symbols.size(), 3u);
    if (!h.ended) {
      EXPECT_TRUE(!h.finished || h.symbols.size() == 3u);
    }
    // log probability is the sum of the per-step terms
    std::vector<std::size_t> prefix;
    double lp = 0.0;
    for (auto y : h.symbols) {
      lp += s.dist(prefix)[y];
      prefix.push_back(y);
    }
    if (h.ended) lp += s.dist(prefix)[Vocabulary::kEos];
    EXPECT_NEAR(h.log_prob, lp, 1e-12);
  }
}

TEST(BeamSearch, Preconditions) {
  TableScorer s;
  EXPECT_THROW(beam_search(s, 0, 3), Error);
  EXPECT_THROW(beam_search(s, 2, 0), Error);
  EXPECT_THROW(greedy_decode(s, 0), Error);
}

TEST(GreedyDecode, MaxLenOneEmitsAtMostOneSymbol) {
  for (std::uint64_t k = 0; k < 50; ++k) {
    TableScorer s;
    s.V = 6;
    s.seed = k;
    EXPECT_LE(greedy_decode(s, 1).symbols.size(), 1u);
  }
}

// ---------------------------------------------------------------------------
// Model-backed decoding

TEST(ModelDecode, BeamOneIsGreedyAndDeterministic) {
  for (Variant v : {Variant::kBaseline, Variant::kMultiSource, Variant::kMaskBased}) {
    for (std::uint64_t k = 0; k < 5; ++k) {
      Model m = Model::create(small(v), k);
      if (m.config.has_anchor()) m.params["g"][0] = 0.5;
      const auto u = tiny_sample(4, 4, 6 + k, mix_seed(k, 3));
      const Hypothesis g = greedy_decode(m, u);
      const Hypothesis b = beam_search(m, u, 1).front();
      EXPECT_EQ(g.symbols, b.symbols);
      EXPECT_EQ(g.log_prob, b.log_prob);
      EXPECT_EQ(greedy_decode(m, u).log_prob, g.log_prob);
      EXPECT_LE(g.symbols.size(), 2 * m.config.encoder_conv().out_frames(u.body.frames));
    }
  }
}

TEST(ModelDecode, RescoringMatches) {
  for (Variant v : {Variant::kBaseline, Variant::kMultiSource, Variant::kMaskBased}) {
    Model m = Model::create(small(v), 9);
    if (m.config.has_anchor()) m.params["g"][0] = -0.7;
    const auto u = tiny_sample(4, 4, 8, 5);
    const auto hyps = beam_search(m, u, 6, 5);
    ASSERT_FALSE(hyps.empty());
    for (const auto &h : hyps)
      EXPECT_NEAR(h.log_prob, score_sequence(m, u, h.symbols, h.ended), 1e-9) << to_string(v);
  }
}

TEST(ModelDecode, WiderBeamNotWorseThanGreedy) {
  const Model m = Model::create(small(Variant::kBaseline), 4);
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto u = tiny_sample(4, 4, 8, k);
    const double g = greedy_decode(m, u, 6).log_prob;
    for (std::size_t beam : {2u, 4u, 8u}) EXPECT_GE(beam_search(m, u, beam, 6).front().log_prob, g - 1e-12);
  }
}

TEST(ModelDecode, TrainedOnEmptyTranscriptsDecodesNothing) {
  Corpus c;
  for (std::uint64_t k = 0; k < 4; ++k) {
    AnchoredUtterance u = tiny_sample(4, 4, 6, k);
    u.id = "bg" + std::to_string(k) + "_spk0";
    u.transcript.clear();
    u.gold_mask = GoldMask(6, 0);
    c.push_back(u);
  }
  TrainConfig tc;
  tc.lr = 0.05;
  tc.decay = 1.0;
  tc.epochs = 30;
  tc.batch_size = 4;
  const FitResult r = fit(Model::create(small(Variant::kBaseline), 2), c, tc);
  for (const auto &u : c) {
    const auto h = beam_search(r.model, u, 3).front();
    EXPECT_TRUE(h.symbols.empty());
    EXPECT_TRUE(h.ended);
  }
  const auto out = decode_corpus(r.model, c, 3);
  for (const auto &d : out) EXPECT_EQ(d.text, "");
}

// ---------------------------------------------------------------------------
// Hypothesis file

TEST(HypothesisFile, RoundTrip) {
  const std::vector<DecodedUtterance> hyps{{"u1", -1.25, "a b"}, {"u2", -0.5, ""}, {"u3", -3e-7, "b"}};
  const std::string text = hypotheses_to_text(hyps);
  EXPECT_EQ(text.substr(0, 3), "u1\t");
  const auto back = parse_hypotheses(text);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].id, hyps[i].id);
    EXPECT_EQ(back[i].log_prob, hyps[i].log_prob);
    EXPECT_EQ(back[i].text, hyps[i].text);
  }
  EXPECT_EQ(hypotheses_to_text(back), text);
}

TEST(HypothesisFile, Errors) {
  EXPECT_THROW(parse_hypotheses("u1\t-1\n"), Error);
  EXPECT_THROW(parse_hypotheses("u1\tx\tab\n"), Error);
  EXPECT_TRUE(parse_hypotheses("").empty());
}
