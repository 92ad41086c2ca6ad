// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   decode.hpp
 * @brief  Beam search and greedy decoding.
 *
 * The search is written against a StepScorer: anything that can produce an
 * initial state and, for a state plus the previously emitted symbol, the
 * successor state and log-probabilities of the next symbol. ModelScorer
 * adapts a trained Model; tests use table-driven scorers.
 */
#pragma once

#include <algorithm>
#include <concepts>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "anchor/corpus.hpp"
#include "anchor/model.hpp"

namespace anchor {

template <typename S>
concept StepScorer = requires(S &s, const typename S::State &st, std::size_t y) {
  { s.initial() } -> std::convertible_to<typename S::State>;
  { s.step(st, y) } -> std::convertible_to<std::pair<typename S::State, std::vector<double>>>;
};

struct Hypothesis {
  std::vector<std::size_t> symbols;  // emitted symbols, end-of-sequence excluded
  double log_prob = 0.0;
  bool finished = false;
  bool ended = false;  // true when end-of-sequence was emitted
};

/// Symbols a hypothesis may be extended with: everything except padding
/// and start-of-sequence.
inline bool expandable(std::size_t symbol) {
  return symbol != Vocabulary::kPad && symbol != Vocabulary::kSos;
}

/// Expands every live hypothesis over the vocabulary and keeps the best
/// `beam_size` extensions by total log-probability (ties: earlier parent,
/// then lower symbol index). Extensions ending in end-of-sequence retire to
/// the finished pool. No length normalization is applied.
template <StepScorer Scorer>
std::vector<Hypothesis> beam_search(Scorer &scorer, std::size_t beam_size,
                                    std::size_t max_len) {
  require(beam_size >= 1, "beam_search: beam size must be >= 1");
  require(max_len >= 1, "beam_search: max_len must be >= 1");
  using State = typename Scorer::State;
  struct Live {
    State state;
    Hypothesis hyp;
    std::size_t last;
  };
  struct Candidate {
    double score;
    std::size_t parent;
    std::size_t symbol;
  };

  std::vector<Live> live;
  live.push_back({scorer.initial(), {}, Vocabulary::kSos});
  std::vector<Hypothesis> pool;

  for (std::size_t step = 1; step <= max_len && !live.empty(); ++step) {
    std::vector<State> next_states;
    std::vector<Candidate> cands;
    next_states.reserve(live.size());
    for (std::size_t b = 0; b < live.size(); ++b) {
      auto [st, logp] = scorer.step(live[b].state, live[b].last);
      next_states.push_back(std::move(st));
      for (std::size_t v = 0; v < logp.size(); ++v)
        if (expandable(v)) cands.push_back({live[b].hyp.log_prob + logp[v], b, v});
    }
    const std::size_t keep = std::min(beam_size, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(),
                      [](const Candidate &a, const Candidate &b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.symbol < b.symbol;
                      });
    std::vector<Live> survivors;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto &c = cands[k];
      Hypothesis h = live[c.parent].hyp;
      h.log_prob = c.score;
      if (c.symbol == Vocabulary::kEos) {
        h.finished = h.ended = true;
        pool.push_back(std::move(h));
        continue;
      }
      h.symbols.push_back(c.symbol);
      if (step == max_len) {
        h.finished = true;
        pool.push_back(std::move(h));
        continue;
      }
      survivors.push_back({next_states[c.parent], std::move(h), c.symbol});
    }
    live = std::move(survivors);

    // Log-probabilities only decrease, so once the pool holds beam_size
    // hypotheses that all beat every live one the ranking head is final.
    if (pool.size() >= beam_size && !live.empty()) {
      std::vector<double> scores;
      for (const auto &h : pool) scores.push_back(h.log_prob);
      std::nth_element(scores.begin(), scores.begin() + (beam_size - 1), scores.end(),
                       std::greater<>());
      const double kth = scores[beam_size - 1];
      double best_live = -INFINITY;
      for (const auto &l : live) best_live = std::max(best_live, l.hyp.log_prob);
      if (best_live < kth) break;
    }
  }
  for (auto &l : live) pool.push_back(std::move(l.hyp));
  std::stable_sort(pool.begin(), pool.end(), [](const Hypothesis &a, const Hypothesis &b) {
    return a.log_prob > b.log_prob;
  });
  return pool;
}

/// Argmax decoding (ties: lowest symbol index).
template <StepScorer Scorer>
Hypothesis greedy_decode(Scorer &scorer, std::size_t max_len) {
  require(max_len >= 1, "greedy_decode: max_len must be >= 1");
  auto state = scorer.initial();
  std::size_t last = Vocabulary::kSos;
  Hypothesis h;
  for (std::size_t step = 1; step <= max_len; ++step) {
    auto [st, logp] = scorer.step(state, last);
    std::size_t best = Vocabulary::kEos;
    for (std::size_t v = 0; v < logp.size(); ++v)
      if (expandable(v) && logp[v] > logp[best]) best = v;
    h.log_prob += logp[best];
    if (best == Vocabulary::kEos) {
      h.finished = h.ended = true;
      return h;
    }
    h.symbols.push_back(best);
    state = std::move(st);
    last = best;
  }
  h.finished = true;
  return h;
}

/// Decoder over one utterance: encodes once, then scores prefixes on an
/// inference tape.
class ModelScorer {
 public:
  using State = DecoderState;

  ModelScorer(const Model &model, const AnchoredUtterance &sample)
      : model_(model), tape_(std::make_unique<Tape>(false)) {
    enc_ = encode_sample(*tape_, model_, sample);
    dv_ = decoder_vars(*tape_, model_);
  }

  std::size_t encoder_frames() const { return enc_.T; }

  State initial() { return initial_decoder_state(*tape_, model_.config); }

  std::pair<State, std::vector<double>> step(const State &state, std::size_t y_prev) {
    DecoderStep s = decoder_step(*tape_, dv_, enc_, state, y_prev);
    return {std::move(s.state), log_softmax(tape_->value(s.logits).data())};
  }

 private:
  const Model &model_;
  std::unique_ptr<Tape> tape_;
  EncodedVars enc_;
  DecoderVars dv_;
};

/// Default maximum output length: twice the encoder frame count.
inline std::size_t default_max_len(const ModelScorer &s) { return 2 * s.encoder_frames(); }

inline std::vector<Hypothesis> beam_search(const Model &model, const AnchoredUtterance &sample,
                                           std::size_t beam_size, std::size_t max_len = 0) {
  ModelScorer scorer(model, sample);
  return beam_search(scorer, beam_size, max_len ? max_len : default_max_len(scorer));
}

inline Hypothesis greedy_decode(const Model &model, const AnchoredUtterance &sample,
                                std::size_t max_len = 0) {
  ModelScorer scorer(model, sample);
  return greedy_decode(scorer, max_len ? max_len : default_max_len(scorer));
}

/// Teacher-forced log-probability of `symbols` (plus end-of-sequence when
/// `ended`), computed through the training graph.
inline double score_sequence(const Model &model, const AnchoredUtterance &sample,
                             std::span<const std::size_t> symbols, bool ended) {
  std::vector<std::size_t> targets(symbols.begin(), symbols.end());
  const bool append_eos = ended || targets.empty();
  targets.push_back(Vocabulary::kEos);
  Tape tape(false);
  const auto fv = build_forward(tape, model, sample, targets);
  const std::size_t n_scored = append_eos ? targets.size() : targets.size() - 1;
  double total = 0.0;
  for (std::size_t n = 0; n < n_scored; ++n)
    total += log_softmax(tape.value(fv.logits[n]).data())[targets[n]];
  return total;
}

// ---------------------------------------------------------------------------
// Hypothesis file: "id \t log_prob \t text" per line.

struct DecodedUtterance {
  std::string id;
  double log_prob = 0.0;
  std::string text;
};

inline std::string hypotheses_to_text(std::span<const DecodedUtterance> hyps) {
  std::string out;
  for (const auto &h : hyps) out += h.id + "\t" + format_double(h.log_prob) + "\t" + h.text + "\n";
  return out;
}

inline std::vector<DecodedUtterance> parse_hypotheses(std::string_view text) {
  std::vector<DecodedUtterance> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos)
      throw Error("hypothesis line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    DecodedUtterance d;
    d.id = std::string(line.substr(0, t1));
    try {
      d.log_prob = std::stod(std::string(line.substr(t1 + 1, t2 - t1 - 1)));
    } catch (const std::exception &) {
      throw Error("hypothesis line " + std::to_string(line_no) + ": bad log probability");
    }
    d.text = std::string(line.substr(t2 + 1));
    out.push_back(std::move(d));
  }
  return out;
}

/// Decodes every utterance; beam_size 1 uses greedy search.
inline std::vector<DecodedUtterance> decode_corpus(const Model &model, const Corpus &corpus,
                                                   std::size_t beam_size) {
  const Vocabulary vocab = model.config.vocabulary();
  std::vector<DecodedUtterance> out;
  out.reserve(corpus.size());
  for (const auto &u : corpus) {
    const Hypothesis h = beam_size <= 1 ? greedy_decode(model, u) : beam_search(model, u, beam_size).front();
    out.push_back({u.id, h.log_prob, vocab.decode(h.symbols)});
  }
  return out;
}

}  // namespace anchor
