// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   eval.hpp
 * @brief  Word error rate with substitution/insertion/deletion breakdown,
 *         baseline-normalized reporting, relative WER reduction and frame
 *         mask recall.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "anchor/io.hpp"
#include "anchor/numerics/tensor.hpp"

namespace anchor {

struct ErrorCounts {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t ref_len = 0;

  std::size_t errors() const { return substitutions + insertions + deletions; }

  ErrorCounts &operator+=(const ErrorCounts &o) {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    ref_len += o.ref_len;
    return *this;
  }
  friend bool operator==(const ErrorCounts &, const ErrorCounts &) = default;
};

inline std::vector<std::string> split_words(const std::string &text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

/// Unit-cost Levenshtein alignment. Among minimum-cost alignments the one
/// with the most deletions wins, then the most substitutions (so the fewest
/// insertions).
inline ErrorCounts align(std::span<const std::string> ref,
                         std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  // Lexicographic cost: (errors, -deletions, -substitutions).
  using Cost = std::tuple<std::size_t, std::ptrdiff_t, std::ptrdiff_t>;
  std::vector<Cost> cost((n + 1) * (m + 1));
  std::vector<ErrorCounts> counts((n + 1) * (m + 1));
  auto idx = [&](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t j = 0; j <= m; ++j) {
      if (i == 0 && j == 0) continue;
      Cost best{std::numeric_limits<std::size_t>::max(), 0, 0};
      ErrorCounts bc;
      auto consider = [&](std::size_t pi, std::size_t pj, std::size_t s, std::size_t ins,
                          std::size_t del) {
        const auto &[e, nd, ns] = cost[idx(pi, pj)];
        const Cost c{e + s + ins + del, nd - static_cast<std::ptrdiff_t>(del),
                     ns - static_cast<std::ptrdiff_t>(s)};
        if (c < best) {
          best = c;
          bc = counts[idx(pi, pj)];
          bc.substitutions += s;
          bc.insertions += ins;
          bc.deletions += del;
        }
      };
      if (i > 0 && j > 0) consider(i - 1, j - 1, ref[i - 1] == hyp[j - 1] ? 0 : 1, 0, 0);
      if (i > 0) consider(i - 1, j, 0, 0, 1);
      if (j > 0) consider(i, j - 1, 0, 1, 0);
      cost[idx(i, j)] = best;
      counts[idx(i, j)] = bc;
    }
  ErrorCounts c = counts[idx(n, m)];
  c.ref_len = n;
  return c;
}

inline ErrorCounts align(const std::string &ref, const std::string &hyp) {
  const auto r = split_words(ref), h = split_words(hyp);
  return align(std::span<const std::string>(r), std::span<const std::string>(h));
}

/// (S+I+D)/N; an empty reference divides by 1 instead.
inline double wer(const ErrorCounts &c) {
  if (c.ref_len == 0) return static_cast<double>(c.errors());
  return static_cast<double>(c.errors()) / static_cast<double>(c.ref_len);
}

/// Relative WER reduction in percent; positive means the system improved.
inline double werr(double baseline_wer, double system_wer) {
  require(baseline_wer > 0.0, "werr: baseline WER must be positive");
  return 100.0 * (baseline_wer - system_wer) / baseline_wer;
}

/// Absolute per-test-set rates (fractions of reference words).
struct AbsoluteMetrics {
  std::string model;
  std::string training_set;
  std::string test_set;
  double wer = 0.0;
  double sub = 0.0;
  double ins = 0.0;
  double del = 0.0;

  static AbsoluteMetrics from(std::string model, std::string training_set,
                              std::string test_set, const ErrorCounts &c) {
    const double n = c.ref_len ? static_cast<double>(c.ref_len) : 1.0;
    return {std::move(model), std::move(training_set), std::move(test_set), anchor::wer(c),
            c.substitutions / n, c.insertions / n, c.deletions / n};
  }
};

struct NormalizedRow {
  std::string model;
  std::string training_set;
  std::string test_set;
  double wer = 0.0;
  double sub = 0.0;
  double ins = 0.0;
  double del = 0.0;
  /// Against the baseline on the same test set; empty for the baseline rows.
  std::optional<double> werr;
};

struct NormalizedReport {
  double divisor = 0.0;
  std::vector<NormalizedRow> rows;
};

/// Divides every rate by `baseline_normal_wer`.
inline NormalizedRow normalize(const AbsoluteMetrics &m, double baseline_normal_wer) {
  require(baseline_normal_wer > 0.0,
          "normalize_report: baseline WER on the normal set is zero");
  const double d = baseline_normal_wer;
  return {m.model, m.training_set, m.test_set, m.wer / d, m.sub / d, m.ins / d, m.del / d,
          std::nullopt};
}

/// Normalizes all rows by the baseline's normal-set WER and fills WERR
/// against the row of (baseline_model, baseline_training_set) on the same
/// test set.
inline NormalizedReport normalize_report(std::span<const AbsoluteMetrics> rows,
                                         const std::string &baseline_model,
                                         const std::string &baseline_training_set,
                                         const std::string &normal_set = "normal") {
  auto find = [&](const std::string &test_set) -> const AbsoluteMetrics * {
    for (const auto &r : rows)
      if (r.model == baseline_model && r.training_set == baseline_training_set &&
          r.test_set == test_set)
        return &r;
    return nullptr;
  };
  const AbsoluteMetrics *base_normal = find(normal_set);
  require(base_normal != nullptr, "normalize_report: no baseline row for '" + normal_set + "'");
  NormalizedReport rep;
  rep.divisor = base_normal->wer;
  for (const auto &r : rows) {
    NormalizedRow n = normalize(r, rep.divisor);
    const bool is_base = r.model == baseline_model && r.training_set == baseline_training_set;
    if (const auto *b = find(r.test_set); b && !is_base && b->wer > 0.0)
      n.werr = werr(b->wer, r.wer);
    rep.rows.push_back(std::move(n));
  }
  return rep;
}

/// CSV: model,training_set,test_set,WER,sub,ins,del,WERR.
inline std::string report_csv(const NormalizedReport &rep) {
  std::string out = "model,training_set,test_set,WER,sub,ins,del,WERR\n";
  for (const auto &r : rep.rows) {
    out += r.model + "," + r.training_set + "," + r.test_set + "," +
           format_fixed(r.wer, 3) + "," + format_fixed(r.sub, 3) + "," +
           format_fixed(r.ins, 3) + "," + format_fixed(r.del, 3) + ",";
    if (r.werr) {
      out += (*r.werr >= 0 ? "+" : "") + format_fixed(*r.werr, 1);
    } else {
      out += "---";
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mask recall

struct MaskRecallCounts {
  std::size_t hit0 = 0, total0 = 0;
  std::size_t hit1 = 0, total1 = 0;

  MaskRecallCounts &operator+=(const MaskRecallCounts &o) {
    hit0 += o.hit0, total0 += o.total0, hit1 += o.hit1, total1 += o.total1;
    return *this;
  }

  /// Recall of label 0; empty when no frame carries label 0.
  std::optional<double> recall0() const {
    if (!total0) return std::nullopt;
    return static_cast<double>(hit0) / static_cast<double>(total0);
  }
  std::optional<double> recall1() const {
    if (!total1) return std::nullopt;
    return static_cast<double>(hit1) / static_cast<double>(total1);
  }
};

/// Predicted label is 1 iff phi >= threshold.
inline MaskRecallCounts mask_recall_counts(std::span<const double> phi,
                                           std::span<const std::uint8_t> gold,
                                           double threshold = 0.5) {
  require(phi.size() == gold.size(), "mask_recall: length mismatch");
  require(threshold > 0.0 && threshold < 1.0, "mask_recall: threshold must be in (0,1)");
  MaskRecallCounts c;
  for (std::size_t t = 0; t < phi.size(); ++t) {
    const bool pred = phi[t] >= threshold;
    if (gold[t]) {
      ++c.total1;
      c.hit1 += pred ? 1 : 0;
    } else {
      ++c.total0;
      c.hit0 += pred ? 0 : 1;
    }
  }
  return c;
}

/// (recall of label 0, recall of label 1).
inline std::pair<std::optional<double>, std::optional<double>> mask_recall(
    std::span<const double> phi, std::span<const std::uint8_t> gold,
    double threshold = 0.5) {
  const auto c = mask_recall_counts(phi, gold, threshold);
  return {c.recall0(), c.recall1()};
}

}  // namespace anchor
