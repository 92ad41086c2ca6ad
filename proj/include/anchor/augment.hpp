// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   augment.hpp
 * @brief  Synthetic interfering-speech data: segment insertion (method 1),
 *         body replacement (method 2), corpus mixing and gold masks.
 */
#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "anchor/corpus.hpp"

namespace anchor {

/// Fractions of a corpus kept unchanged, corrupted by method 1 and by
/// method 2.
struct MixSpec {
  double unchanged = 1.0;
  double method1 = 0.0;
  double method2 = 0.0;

  void validate() const {
    require(unchanged >= 0 && method1 >= 0 && method2 >= 0,
            "mix fractions must be non-negative");
    require(std::abs(unchanged + method1 + method2 - 1.0) <= 1e-9,
            "mix fractions must sum to 1");
  }

  /// Parses "a,b,c".
  static MixSpec parse(const std::string &s) {
    MixSpec m;
    std::array<double *, 3> slots{&m.unchanged, &m.method1, &m.method2};
    std::size_t start = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto comma = s.find(',', start);
      if ((k < 2) != (comma != std::string::npos))
        throw ConfigError("mix spec must be three comma-separated fractions");
      try {
        *slots[k] = std::stod(s.substr(start, comma - start));
      } catch (const std::exception &) {
        throw ConfigError("mix spec '" + s + "' is not numeric");
      }
      start = comma + 1;
    }
    m.validate();
    return m;
  }
};

/// Fractions used for the augmented training condition.
inline constexpr MixSpec kAugmentedMix{0.50, 0.44, 0.06};

/// Full-scale inserted segment length range, in frames.
inline constexpr Range kFullScaleSegmentRange{50, 150};

namespace detail {

inline GoldMask mask_or_ones(const AnchoredUtterance &u) {
  return u.gold_mask ? *u.gold_mask : GoldMask(u.body.frames, 1);
}

}  // namespace detail

/// Inserts donor body frames [donor_start, donor_start + seg_len) at body
/// offset `position` of `utt`. The transcript and anchor are kept.
inline AnchoredUtterance insert_segment(const AnchoredUtterance &utt,
                                        const AnchoredUtterance &donor,
                                        std::size_t donor_start,
                                        std::size_t seg_len,
                                        std::size_t position) {
  require(donor.id != utt.id, "method 1: donor must be a different utterance");
  require(seg_len >= 1, "method 1: empty segment");
  require(donor_start + seg_len <= donor.body.frames,
          "method 1: donor " + donor.id + " has " +
              std::to_string(donor.body.frames) + " frames, too short for a " +
              std::to_string(seg_len) + "-frame segment");
  require(donor.body.dim == utt.body.dim, "method 1: feature dims differ");
  require(position <= utt.body.frames, "method 1: insertion past the end");

  const std::size_t dim = utt.body.dim;
  AnchoredUtterance out;
  out.id = utt.id + "#m1";
  out.anchor = utt.anchor;
  out.transcript = utt.transcript;
  out.body = FeatureSequence(utt.body.frames + seg_len, dim);
  auto &dst = out.body.data;
  const auto &src = utt.body.data;
  const auto &don = donor.body.data;
  std::copy_n(src.begin(), position * dim, dst.begin());
  std::copy_n(don.begin() + donor_start * dim, seg_len * dim,
              dst.begin() + position * dim);
  std::copy(src.begin() + position * dim, src.end(),
            dst.begin() + (position + seg_len) * dim);

  const GoldMask orig = detail::mask_or_ones(utt);
  GoldMask mask(orig.begin(), orig.begin() + position);
  mask.insert(mask.end(), seg_len, 0);
  mask.insert(mask.end(), orig.begin() + position, orig.end());
  out.gold_mask = std::move(mask);
  return out;
}

/// Method 1 with seeded draws: segment length uniform in `seg_len_range`,
/// donor offset uniform, insertion position uniform in [0, L].
inline AnchoredUtterance synth_method1(const AnchoredUtterance &utt,
                                       const AnchoredUtterance &donor,
                                       Range seg_len_range, Rng &rng) {
  require(seg_len_range.lo >= 1 && seg_len_range.lo <= seg_len_range.hi,
          "method 1: segment length range is empty or inverted");
  require(donor.body.frames >= seg_len_range.hi,
          "method 1: donor " + donor.id + " is shorter than the maximum "
          "segment length " + std::to_string(seg_len_range.hi));
  const auto S = static_cast<std::size_t>(
      rng.uniform_int(seg_len_range.lo, seg_len_range.hi));
  const auto start = static_cast<std::size_t>(
      rng.uniform_int(0, donor.body.frames - S));
  const auto p = static_cast<std::size_t>(rng.uniform_int(0, utt.body.frames));
  return insert_segment(utt, donor, start, S, p);
}

inline AnchoredUtterance synth_method1(const AnchoredUtterance &utt,
                                       const AnchoredUtterance &donor,
                                       Range seg_len_range, std::uint64_t seed) {
  Rng rng(seed);
  return synth_method1(utt, donor, seg_len_range, rng);
}

/// Method 2: the body is replaced by the donor's body, the transcript
/// becomes empty and every frame is labelled background.
inline AnchoredUtterance synth_method2(const AnchoredUtterance &utt,
                                       const AnchoredUtterance &donor) {
  require(donor.id != utt.id, "method 2: donor must be a different utterance");
  require(donor.body.dim == utt.anchor.dim, "method 2: feature dims differ");
  AnchoredUtterance out;
  out.id = utt.id + "#m2";
  out.anchor = utt.anchor;
  out.body = donor.body;
  out.transcript.clear();
  out.gold_mask = GoldMask(donor.body.frames, 0);
  return out;
}

/// Exact per-class counts from fractions by largest-remainder rounding;
/// ties go to the earlier class.
inline std::array<std::size_t, 3> mix_counts(std::size_t n, const MixSpec &spec) {
  spec.validate();
  const std::array<double, 3> f{spec.unchanged, spec.method1, spec.method2};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = f[k] * static_cast<double>(n);
    // Guard against 0.44 * 100 = 44.000000000000007 style residue.
    const double rounded = std::round(exact);
    const double base = std::abs(exact - rounded) < 1e-9 ? rounded : std::floor(exact);
    counts[k] = static_cast<std::size_t>(base);
    rem[k] = exact - base;
    assigned += counts[k];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (rem[k] > rem[best]) best = k;
    ++counts[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return counts;
}

enum class MixRole : std::uint8_t { kUnchanged = 0, kMethod1 = 1, kMethod2 = 2 };

/// Seeded role assignment: a shuffled partition with exact counts.
inline std::vector<MixRole> mix_assignment(std::size_t n, const MixSpec &spec,
                                           std::uint64_t seed) {
  const auto counts = mix_counts(n, spec);
  std::vector<MixRole> roles;
  roles.insert(roles.end(), counts[0], MixRole::kUnchanged);
  roles.insert(roles.end(), counts[1], MixRole::kMethod1);
  roles.insert(roles.end(), counts[2], MixRole::kMethod2);
  Rng rng(mix_seed(seed, 0xA551));
  for (std::size_t i = n; i > 1; --i)
    std::swap(roles[i - 1], roles[rng.uniform_int(0, i - 1)]);
  return roles;
}

/// Builds an augmented corpus of the same size. Unchanged utterances get an
/// all-ones gold mask; donors are drawn uniformly from the other utterances.
inline Corpus mix_corpus(const Corpus &corpus, const MixSpec &spec,
                         Range seg_len_range, std::uint64_t seed) {
  require(corpus.size() >= 2, "mix_corpus: need at least 2 utterances (no donor)");
  const auto roles = mix_assignment(corpus.size(), spec, seed);
  Corpus out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Rng rng(mix_seed(seed, i + 1));
    auto draw_donor = [&](std::size_t min_frames) -> const AnchoredUtterance & {
      for (int attempt = 0; attempt < 10000; ++attempt) {
        auto j = static_cast<std::size_t>(rng.uniform_int(0, corpus.size() - 2));
        if (j >= i) ++j;
        if (corpus[j].body.frames >= min_frames) return corpus[j];
      }
      throw Error("mix_corpus: no donor with at least " +
                  std::to_string(min_frames) + " body frames");
    };
    switch (roles[i]) {
      case MixRole::kUnchanged: {
        AnchoredUtterance u = corpus[i];
        u.gold_mask = GoldMask(u.body.frames, 1);
        out.push_back(std::move(u));
        break;
      }
      case MixRole::kMethod1:
        out.push_back(synth_method1(corpus[i], draw_donor(seg_len_range.hi),
                                    seg_len_range, rng));
        break;
      case MixRole::kMethod2:
        out.push_back(synth_method2(corpus[i], draw_donor(1)));
        break;
    }
  }
  return out;
}

/// Majority label per window of `time_factor` frames; ties -> 0.
inline GoldMask downsample_mask(std::span<const std::uint8_t> mask,
                                std::size_t time_factor) {
  require(time_factor >= 1, "downsample_mask: factor must be >= 1");
  GoldMask out;
  out.reserve((mask.size() + time_factor - 1) / time_factor);
  for (std::size_t s = 0; s < mask.size(); s += time_factor) {
    const std::size_t e = std::min(mask.size(), s + time_factor);
    std::size_t ones = 0;
    for (std::size_t k = s; k < e; ++k) ones += mask[k] ? 1 : 0;
    out.push_back(2 * ones > e - s ? 1 : 0);
  }
  return out;
}

}  // namespace anchor
