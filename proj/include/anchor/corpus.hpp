// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   corpus.hpp
 * @brief  Anchored utterances, grapheme vocabulary, the toy corpus generator
 *         and the binary corpus format.
 *
 * Corpus file layout (little-endian):
 *
 *   "ANCH" | version u32 | count u32 | utterance*
 *   utterance := id (u16 len + UTF-8) | transcript (u16 len + UTF-8)
 *                | feat_dim u16 | anchor_frames u32 | body_frames u32
 *                | anchor f32[anchor_frames * feat_dim]
 *                | body f32[body_frames * feat_dim]
 *                | mask_flag u8 | (mask u8[body_frames] if flag == 1)
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anchor/config.hpp"
#include "anchor/io.hpp"
#include "anchor/numerics/rng.hpp"
#include "anchor/numerics/tensor.hpp"

namespace anchor {

/// Time-major feature frames (frames x dim), stored in single precision as in
/// the corpus file.
struct FeatureSequence {
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::vector<float> data;

  FeatureSequence() = default;
  FeatureSequence(std::size_t n_frames, std::size_t feat_dim)
      : frames(n_frames), dim(feat_dim), data(n_frames * feat_dim, 0.0f) {}

  std::span<float> frame(std::size_t t) { return {data.data() + t * dim, dim}; }
  std::span<const float> frame(std::size_t t) const {
    return {data.data() + t * dim, dim};
  }

  Tensor to_tensor() const {
    require(frames > 0 && dim > 0, "empty feature sequence");
    return Tensor({frames, dim}, std::vector<double>(data.begin(), data.end()));
  }

  friend bool operator==(const FeatureSequence &,
                         const FeatureSequence &) = default;
};

/// Per body frame: 1 = device-directed (original), 0 = inserted/background.
using GoldMask = std::vector<std::uint8_t>;

struct AnchoredUtterance {
  std::string id;
  FeatureSequence anchor;
  FeatureSequence body;
  std::string transcript;
  std::optional<GoldMask> gold_mask;

  friend bool operator==(const AnchoredUtterance &,
                         const AnchoredUtterance &) = default;
};

using Corpus = std::vector<AnchoredUtterance>;

// ---------------------------------------------------------------------------
// Vocabulary

namespace detail {

inline std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3
                                 : (c >> 3) == 0x1E ? 4 : 0;
    require(len != 0 && i + len <= s.size(), "invalid UTF-8 in transcript");
    char32_t cp = len == 1 ? c : c & (0x7F >> len);
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      require((cc & 0xC0) == 0x80, "invalid UTF-8 in transcript");
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline std::string encode_utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

}  // namespace detail

/// Grapheme inventory plus the reserved padding, start and end symbols.
/// Indices 0..2 are reserved; graphemes follow in codepoint order.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kSos = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kNumReserved = 3;

  Vocabulary() = default;

  /// `graphemes` is a UTF-8 string of distinct codepoints.
  explicit Vocabulary(std::string_view graphemes) {
    auto cps = detail::decode_utf8(graphemes);
    require(!cps.empty(), "vocabulary has no graphemes");
    std::sort(cps.begin(), cps.end());
    require(std::adjacent_find(cps.begin(), cps.end()) == cps.end(),
            "vocabulary graphemes must be unique");
    graphemes_ = std::move(cps);
    for (std::size_t i = 0; i < graphemes_.size(); ++i)
      index_[graphemes_[i]] = kNumReserved + i;
  }

  std::size_t size() const { return kNumReserved + graphemes_.size(); }
  std::size_t num_graphemes() const { return graphemes_.size(); }
  bool is_reserved(std::size_t id) const { return id < kNumReserved; }

  std::string graphemes() const {
    std::string out;
    for (auto cp : graphemes_) out += detail::encode_utf8(cp);
    return out;
  }

  std::string symbol(std::size_t id) const {
    require(id < size(), "symbol index out of range");
    switch (id) {
      case kPad: return "<pad>";
      case kSos: return "<s>";
      case kEos: return "</s>";
      default: return detail::encode_utf8(graphemes_[id - kNumReserved]);
    }
  }

  bool contains(char32_t cp) const { return index_.count(cp) != 0; }

  /// Grapheme ids of a transcript (no delimiters).
  std::vector<std::size_t> encode(std::string_view transcript) const {
    std::vector<std::size_t> out;
    for (char32_t cp : detail::decode_utf8(transcript)) {
      auto it = index_.find(cp);
      require(it != index_.end(), "transcript character '" +
                                      detail::encode_utf8(cp) +
                                      "' is not in the vocabulary");
      out.push_back(it->second);
    }
    return out;
  }

  /// Training target: grapheme ids followed by end-of-sequence.
  std::vector<std::size_t> targets(std::string_view transcript) const {
    auto out = encode(transcript);
    out.push_back(kEos);
    return out;
  }

  /// Surface string; reserved symbols are dropped.
  std::string decode(std::span<const std::size_t> ids) const {
    std::string out;
    for (auto id : ids) {
      require(id < size(), "symbol index out of range");
      if (!is_reserved(id)) out += detail::encode_utf8(graphemes_[id - kNumReserved]);
    }
    return out;
  }

  friend bool operator==(const Vocabulary &a, const Vocabulary &b) {
    return a.graphemes_ == b.graphemes_;
  }

 private:
  std::vector<char32_t> graphemes_;
  std::map<char32_t, std::size_t> index_;
};

/// Keeps characters seen at least `min_count` times across `transcripts`.
inline Vocabulary build_vocab(std::span<const std::string> transcripts,
                              std::size_t min_count) {
  require(min_count >= 1, "build_vocab: min_count must be >= 1");
  std::map<char32_t, std::size_t> counts;
  for (const auto &t : transcripts)
    for (char32_t cp : detail::decode_utf8(t)) ++counts[cp];
  std::string kept;
  for (const auto &[cp, n] : counts)
    if (n >= min_count) kept += detail::encode_utf8(cp);
  require(!kept.empty(), "build_vocab: no character reaches min_count " +
                             std::to_string(min_count));
  return Vocabulary(kept);
}

inline Vocabulary build_vocab(const Corpus &corpus, std::size_t min_count) {
  std::vector<std::string> ts;
  for (const auto &u : corpus) ts.push_back(u.transcript);
  return build_vocab(ts, min_count);
}

// ---------------------------------------------------------------------------
// Toy corpus

struct SpeakerProfile {
  std::size_t id = 0;
  std::vector<double> bias;
  std::map<char32_t, std::vector<double>> templates;
  double noise_scale = 0.0;
};

struct ToyCorpusConfig {
  std::size_t n_utts = 100;
  std::size_t feat_dim = 8;
  std::size_t speakers = 4;
  Range transcript_len_range{2, 4};  // words per transcript
  Range word_len_range{1, 3};        // graphemes per word
  Range anchor_len_range{6, 10};     // frames
  std::size_t body_len_per_grapheme = 3;
  double noise_scale = 0.2;
  double bias_scale = 1.0;
  double template_scale = 1.0;
  double template_jitter = 0.0;  // per-speaker template perturbation
  std::string letters = "abcdefghij";  // word graphemes; space separates words

  static const std::set<std::string> &keys() {
    static const std::set<std::string> k{
        "n_utts", "feat_dim", "speakers", "transcript_len_range",
        "word_len_range", "anchor_len_range", "body_len_per_grapheme",
        "noise_scale", "bias_scale", "template_scale", "template_jitter",
        "letters"};
    return k;
  }

  static ToyCorpusConfig from(const KeyValues &kv) {
    kv.check_known(keys(), "corpus");
    ToyCorpusConfig c;
    c.n_utts = kv.get_size("n_utts", c.n_utts);
    c.feat_dim = kv.get_size("feat_dim", c.feat_dim);
    c.speakers = kv.get_size("speakers", c.speakers);
    c.transcript_len_range = kv.get_range("transcript_len_range", c.transcript_len_range);
    c.word_len_range = kv.get_range("word_len_range", c.word_len_range);
    c.anchor_len_range = kv.get_range("anchor_len_range", c.anchor_len_range);
    c.body_len_per_grapheme = kv.get_size("body_len_per_grapheme", c.body_len_per_grapheme);
    c.noise_scale = kv.get_double("noise_scale", c.noise_scale);
    c.bias_scale = kv.get_double("bias_scale", c.bias_scale);
    c.template_scale = kv.get_double("template_scale", c.template_scale);
    c.template_jitter = kv.get_double("template_jitter", c.template_jitter);
    c.letters = kv.get_string("letters", c.letters);
    return c;
  }

  void validate() const {
    auto range_ok = [](const Range &r) { return r.lo >= 1 && r.lo <= r.hi; };
    require(speakers >= 2, "toy corpus needs at least 2 speakers");
    require(feat_dim >= 2, "toy corpus needs feat_dim >= 2");
    require(range_ok(transcript_len_range), "transcript_len_range is empty or inverted");
    require(range_ok(word_len_range), "word_len_range is empty or inverted");
    require(range_ok(anchor_len_range), "anchor_len_range is empty or inverted");
    require(body_len_per_grapheme >= 1, "body_len_per_grapheme must be >= 1");
    require(noise_scale >= 0 && bias_scale > 0 && template_scale >= 0,
            "toy corpus scales must be non-negative");
    require(!letters.empty(), "toy corpus needs letters");
    const auto cps = detail::decode_utf8(letters);
    require(std::find(cps.begin(), cps.end(), U' ') == cps.end(),
            "letters must not contain the word separator");
  }

  /// Vocabulary of every grapheme the generator can emit.
  Vocabulary vocabulary() const { return Vocabulary(letters + " "); }
};

/// Speaker biases are redrawn until every pair differs by at least
/// 4 x noise_scale in some component.
inline std::vector<SpeakerProfile> make_speakers(const ToyCorpusConfig &cfg,
                                                 std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0x5EA4E));
  std::map<char32_t, std::vector<double>> base;
  for (char32_t cp : detail::decode_utf8(cfg.letters + " ")) {
    std::vector<double> t(cfg.feat_dim);
    for (auto &v : t) v = cfg.template_scale * rng.normal();
    base[cp] = std::move(t);
  }
  const double min_gap = 4.0 * cfg.noise_scale;
  std::vector<SpeakerProfile> out;
  for (std::size_t s = 0; s < cfg.speakers; ++s) {
    SpeakerProfile p;
    p.id = s;
    p.noise_scale = cfg.noise_scale;
    bool separated = false;
    for (int attempt = 0; attempt < 10000 && !separated; ++attempt) {
      p.bias.assign(cfg.feat_dim, 0.0);
      for (auto &v : p.bias) v = rng.uniform(-cfg.bias_scale, cfg.bias_scale);
      separated = std::all_of(out.begin(), out.end(), [&](const SpeakerProfile &q) {
        for (std::size_t k = 0; k < cfg.feat_dim; ++k)
          if (std::abs(p.bias[k] - q.bias[k]) >= min_gap) return true;
        return false;
      });
    }
    require(separated, "cannot draw separable speaker biases; lower noise_scale "
                       "or raise bias_scale");
    for (const auto &[cp, t] : base) {
      auto jittered = t;
      for (auto &v : jittered) v += cfg.template_jitter * rng.normal();
      p.templates[cp] = std::move(jittered);
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::size_t speaker_of(const AnchoredUtterance &u) {
  const auto pos = u.id.rfind("_spk");
  require(pos != std::string::npos, "utterance id '" + u.id + "' has no speaker tag");
  return std::stoul(u.id.substr(pos + 4));
}

/// Generates utterance `index` of the toy corpus for (config, seed).
inline AnchoredUtterance gen_toy_utterance(const ToyCorpusConfig &cfg,
                                           const std::vector<SpeakerProfile> &speakers,
                                           std::uint64_t seed, std::size_t index) {
  Rng rng(mix_seed(seed, index + 1));
  const auto &spk = speakers[rng.uniform_int(0, speakers.size() - 1)];
  const auto letters = detail::decode_utf8(cfg.letters);

  std::vector<char32_t> text;
  const auto n_words = rng.uniform_int(cfg.transcript_len_range.lo, cfg.transcript_len_range.hi);
  for (std::int64_t w = 0; w < n_words; ++w) {
    if (w) text.push_back(U' ');
    const auto len = rng.uniform_int(cfg.word_len_range.lo, cfg.word_len_range.hi);
    for (std::int64_t k = 0; k < len; ++k)
      text.push_back(letters[rng.uniform_int(0, letters.size() - 1)]);
  }

  auto emit = [&](std::span<float> frame, const std::vector<double> *tmpl) {
    for (std::size_t k = 0; k < cfg.feat_dim; ++k) {
      double v = spk.bias[k] + cfg.noise_scale * rng.normal();
      if (tmpl) v += (*tmpl)[k];
      frame[k] = static_cast<float>(v);
    }
  };

  AnchoredUtterance u;
  char id[64];
  std::snprintf(id, sizeof id, "utt%06zu_spk%zu", index, spk.id);
  u.id = id;
  const auto anchor_len = rng.uniform_int(cfg.anchor_len_range.lo, cfg.anchor_len_range.hi);
  u.anchor = FeatureSequence(anchor_len, cfg.feat_dim);
  for (std::size_t t = 0; t < u.anchor.frames; ++t) emit(u.anchor.frame(t), nullptr);
  u.body = FeatureSequence(text.size() * cfg.body_len_per_grapheme, cfg.feat_dim);
  std::size_t t = 0;
  for (char32_t cp : text)
    for (std::size_t r = 0; r < cfg.body_len_per_grapheme; ++r)
      emit(u.body.frame(t++), &spk.templates.at(cp));
  for (char32_t cp : text) u.transcript += detail::encode_utf8(cp);
  return u;
}

/// Pure function of (config, seed).
inline Corpus gen_toy_corpus(const ToyCorpusConfig &cfg, std::uint64_t seed) {
  const auto speakers = make_speakers(cfg, seed);
  Corpus out;
  out.reserve(cfg.n_utts);
  for (std::size_t i = 0; i < cfg.n_utts; ++i)
    out.push_back(gen_toy_utterance(cfg, speakers, seed, i));
  return out;
}

// ---------------------------------------------------------------------------
// Corpus file format

class CorpusFormatError : public Error {
 public:
  enum class Kind { kBadMagic, kBadVersion, kTruncated, kMaskLength, kBadValue };

  CorpusFormatError(Kind kind, const std::string &what)
      : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kCorpusVersion = 1;

inline std::vector<std::uint8_t> serialize_corpus(const Corpus &corpus) {
  using K = CorpusFormatError::Kind;
  ByteWriter w;
  w.raw("ANCH");
  w.u32(kCorpusVersion);
  w.u32(static_cast<std::uint32_t>(corpus.size()));
  for (const auto &u : corpus) {
    const std::size_t dim = u.body.dim;
    require(u.anchor.dim == dim, "utterance " + u.id + ": anchor and body dims differ");
    require(dim >= 1 && dim <= 0xFFFF, "utterance " + u.id + ": bad feature dim");
    require(u.anchor.frames >= 1 && u.body.frames >= 1,
            "utterance " + u.id + ": empty anchor or body");
    if (u.gold_mask && u.gold_mask->size() != u.body.frames)
      throw CorpusFormatError(K::kMaskLength,
                              "utterance " + u.id + ": gold mask has " +
                                  std::to_string(u.gold_mask->size()) +
                                  " labels for " + std::to_string(u.body.frames) +
                                  " frames");
    w.str16(u.id);
    w.str16(u.transcript);
    w.u16(static_cast<std::uint16_t>(dim));
    w.u32(static_cast<std::uint32_t>(u.anchor.frames));
    w.u32(static_cast<std::uint32_t>(u.body.frames));
    for (float v : u.anchor.data) w.f32(v);
    for (float v : u.body.data) w.f32(v);
    w.u8(u.gold_mask ? 1 : 0);
    if (u.gold_mask)
      for (auto m : *u.gold_mask) w.u8(m);
  }
  return w.bytes();
}

inline Corpus deserialize_corpus(std::span<const std::uint8_t> bytes) {
  using K = CorpusFormatError::Kind;
  ByteReader r(bytes);
  try {
    if (r.raw(4) != "ANCH") throw CorpusFormatError(K::kBadMagic, "not a corpus file (bad magic)");
    if (auto v = r.u32(); v != kCorpusVersion)
      throw CorpusFormatError(K::kBadVersion,
                              "unsupported corpus version " + std::to_string(v));
    const auto count = r.u32();
    Corpus out;
    for (std::uint32_t i = 0; i < count; ++i) {
      AnchoredUtterance u;
      u.id = r.str16();
      u.transcript = r.str16();
      const std::size_t dim = r.u16();
      const std::size_t la = r.u32();
      const std::size_t lb = r.u32();
      if (dim == 0 || la == 0 || lb == 0)
        throw CorpusFormatError(K::kBadValue, "utterance " + u.id + ": zero-sized features");
      r.need((la + lb) * dim * 4);
      u.anchor = FeatureSequence(la, dim);
      for (auto &v : u.anchor.data) v = r.f32();
      u.body = FeatureSequence(lb, dim);
      for (auto &v : u.body.data) v = r.f32();
      const auto flag = r.u8();
      if (flag > 1)
        throw CorpusFormatError(K::kBadValue, "utterance " + u.id + ": bad mask flag");
      if (flag) {
        r.need(lb);
        GoldMask m(lb);
        for (auto &b : m) {
          b = r.u8();
          if (b > 1)
            throw CorpusFormatError(K::kBadValue, "utterance " + u.id + ": mask label not 0/1");
        }
        u.gold_mask = std::move(m);
      }
      out.push_back(std::move(u));
    }
    if (r.remaining() != 0)
      throw CorpusFormatError(K::kMaskLength,
                              std::to_string(r.remaining()) +
                                  " trailing bytes after the last utterance "
                                  "(mask or frame count mismatch)");
    return out;
  } catch (const TruncatedError &e) {
    throw CorpusFormatError(K::kTruncated, e.what());
  }
}

inline void write_corpus(const Corpus &corpus, const std::string &path) {
  write_file_bytes(path, serialize_corpus(corpus));
}

inline Corpus read_corpus(const std::string &path) {
  return deserialize_corpus(read_file_bytes(path));
}

}  // namespace anchor
