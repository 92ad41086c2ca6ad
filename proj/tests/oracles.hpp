// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   oracles.hpp
 * @brief  Brute-force references: exhaustive word alignment and exhaustive
 *         sequence enumeration over a table-driven next-symbol model.
 */
#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "anchor/decode.hpp"
#include "anchor/numerics/rng.hpp"

namespace anchor::testing {

using Words = std::vector<std::string>;
using Triple = std::tuple<std::size_t, std::size_t, std::size_t>;  // S, I, D

struct AlignmentOracle {
  std::size_t cost = std::numeric_limits<std::size_t>::max();
  std::set<Triple> argmin;  // decompositions of every minimum-cost alignment

  /// Decomposition with the most deletions, then the most substitutions.
  Triple preferred() const {
    Triple best = *argmin.begin();
    for (const auto &t : argmin)
      if (std::tie(std::get<2>(t), std::get<0>(t)) > std::tie(std::get<2>(best), std::get<0>(best)))
        best = t;
    return best;
  }
};

namespace detail {
inline void walk_alignments(const Words &r, const Words &h, std::size_t i, std::size_t j,
                            Triple acc, AlignmentOracle &o) {
  const auto [s, ins, del] = acc;
  if (i == r.size() && j == h.size()) {
    const std::size_t cost = s + ins + del;
    if (cost < o.cost) {
      o.cost = cost;
      o.argmin.clear();
    }
    if (cost == o.cost) o.argmin.insert(acc);
    return;
  }
  if (i < r.size() && j < h.size())
    walk_alignments(r, h, i + 1, j + 1, {s + (r[i] != h[j] ? 1 : 0), ins, del}, o);
  if (j < h.size()) walk_alignments(r, h, i, j + 1, {s, ins + 1, del}, o);
  if (i < r.size()) walk_alignments(r, h, i + 1, j, {s, ins, del + 1}, o);
}
}  // namespace detail

/// Walks every alignment path (match/substitute, insert, delete).
inline AlignmentOracle exhaustive_alignment(const Words &r, const Words &h) {
  AlignmentOracle o;
  detail::walk_alignments(r, h, 0, 0, {0, 0, 0}, o);
  return o;
}

/// Every word sequence of length <= max_len over {a, b, c}.
inline std::vector<Words> all_word_sequences(std::size_t max_len) {
  std::vector<Words> out{{}};
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k].size() == max_len) continue;
    for (const char *w : {"a", "b", "c"}) {
      Words next = out[k];
      next.push_back(w);
      out.push_back(std::move(next));
    }
  }
  return out;
}

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Next-symbol distributions looked up by prefix. Prefixes without an entry
/// get a pseudo-random distribution derived from `seed` and the prefix, so
/// the table is a fixed function of its inputs. Reserved non-output symbols
/// get probability 0.
struct TableScorer {
  using State = std::vector<std::size_t>;
  std::size_t V = 4;
  std::uint64_t seed = 0;
  std::map<State, std::vector<double>> table;

  State initial() { return {}; }

  std::pair<State, std::vector<double>> step(const State &prefix, std::size_t y) {
    State next = prefix;
    if (y != Vocabulary::kSos) next.push_back(y);
    return {next, dist(next)};
  }

  std::vector<double> dist(const State &prefix) {
    if (auto it = table.find(prefix); it != table.end()) return it->second;
    std::uint64_t h = seed;
    for (auto s : prefix) h = mix_seed(h, s + 1);
    Rng rng(h);
    std::vector<double> logits(V, kNegInf);
    for (std::size_t v = 0; v < V; ++v)
      if (expandable(v)) logits[v] = rng.uniform(-3.0, 3.0);
    return log_softmax(logits);
  }
};

struct BestSequence {
  std::vector<std::size_t> symbols;
  bool ended = false;
  double log_prob = kNegInf;
};

namespace detail {
inline void walk_sequences(TableScorer &s, std::vector<std::size_t> &prefix, double lp,
                           std::size_t max_len, BestSequence &best) {
  const auto d = s.dist(prefix);
  for (std::size_t v = 0; v < s.V; ++v) {
    if (!expandable(v)) continue;
    const double total = lp + d[v];
    if (v == Vocabulary::kEos) {
      if (total > best.log_prob) best = {prefix, true, total};
      continue;
    }
    prefix.push_back(v);
    if (prefix.size() == max_len) {
      if (total > best.log_prob) best = {prefix, false, total};
    } else {
      walk_sequences(s, prefix, total, max_len, best);
    }
    prefix.pop_back();
  }
}
}  // namespace detail

/// Joint-probability argmax over every sequence of at most max_len steps:
/// k < max_len symbols then end-of-sequence, or max_len symbols without it.
inline BestSequence exhaustive_best(TableScorer &s, std::size_t max_len) {
  BestSequence best;
  std::vector<std::size_t> prefix;
  detail::walk_sequences(s, prefix, 0.0, max_len, best);
  return best;
}

}  // namespace anchor::testing
