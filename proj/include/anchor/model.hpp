// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   model.hpp
 * @brief  Attention encoder-decoder with optional anchor-word conditioning.
 *
 * Three variants share one graph builder:
 *
 *  - baseline:     h = Encoder(x); additive attention over h.
 *  - multi_source: the speaker encoder maps the anchor to a pooled vector w
 *                  and the body to u_t; attention energies get g * (u_t . w)
 *                  added before the softmax.
 *  - mask_based:   phi_t = sigmoid(g * (u_t . w)) gates each encoder frame;
 *                  attention energies and contexts use phi_t * h_t.
 *
 * The decoder's bottom LSTM layer consumes [embed(y_{n-1}); c_{n-1}] and its
 * output is the attention query. The resulting context c_n is fed to every
 * upper layer and to the output projection.
 */
#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "anchor/config.hpp"
#include "anchor/corpus.hpp"
#include "anchor/io.hpp"
#include "anchor/numerics/layers.hpp"

namespace anchor {

enum class Variant { kBaseline, kMultiSource, kMaskBased };
enum class Pooling { kMaxOverFrames, kLastState };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kMultiSource: return "multi_source";
    case Variant::kMaskBased: return "mask_based";
  }
  return "?";
}

inline Variant parse_variant(std::string s) {
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "baseline") return Variant::kBaseline;
  if (s == "multi_source") return Variant::kMultiSource;
  if (s == "mask_based") return Variant::kMaskBased;
  throw ConfigError("unknown model variant '" + s + "'");
}

inline std::string to_string(Pooling p) {
  return p == Pooling::kMaxOverFrames ? "max_over_frames" : "last_state";
}

inline Pooling parse_pooling(const std::string &s) {
  if (s == "max_over_frames") return Pooling::kMaxOverFrames;
  if (s == "last_state") return Pooling::kLastState;
  throw ConfigError("unknown pooling '" + s + "'");
}

/// "c4 k3x3 s2x2 tanh;c4 k3x3 s1x2 tanh" <-> layer specs.
inline std::string conv_layers_to_string(const std::vector<ConvLayerSpec> &layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto &l = layers[i];
    if (i) out += ";";
    out += "c" + std::to_string(l.channels) + " k" + std::to_string(l.kernel_time) +
           "x" + std::to_string(l.kernel_freq) + " s" + std::to_string(l.stride_time) +
           "x" + std::to_string(l.stride_freq) + " " + to_string(l.activation);
  }
  return out;
}

inline std::vector<ConvLayerSpec> parse_conv_layers(const std::string &text) {
  std::vector<ConvLayerSpec> out;
  std::stringstream layers(text);
  std::string item;
  while (std::getline(layers, item, ';')) {
    if (detail::trim(item).empty()) continue;
    std::istringstream in(item);
    std::string c, k, s, act;
    in >> c >> k >> s >> act;
    ConvLayerSpec l;
    auto pair = [&](const std::string &tok, char tag, std::size_t &a, std::size_t &b) {
      const auto x = tok.find('x');
      if (tok.size() < 4 || tok[0] != tag || x == std::string::npos)
        throw ConfigError("bad conv layer '" + item + "'");
      a = std::stoul(tok.substr(1, x - 1));
      b = std::stoul(tok.substr(x + 1));
    };
    if (c.size() < 2 || c[0] != 'c') throw ConfigError("bad conv layer '" + item + "'");
    try {
      l.channels = std::stoul(c.substr(1));
      pair(k, 'k', l.kernel_time, l.kernel_freq);
      pair(s, 's', l.stride_time, l.stride_freq);
    } catch (const std::logic_error &) {
      throw ConfigError("bad conv layer '" + item + "'");
    }
    l.activation = act.empty() ? Activation::kTanh : parse_activation(act);
    out.push_back(l);
  }
  return out;
}

struct ModelConfig {
  Variant variant = Variant::kBaseline;
  std::size_t feat_dim = 8;
  std::vector<ConvLayerSpec> conv{{4, 3, 3, 2, 2, Activation::kTanh}};
  std::size_t enc_layers = 1;
  std::size_t enc_units = 32;
  std::vector<ConvLayerSpec> s_conv{{4, 3, 3, 2, 2, Activation::kTanh}};
  std::size_t s_rnn_layers = 0;  // bidirectional layers after the S-Encoder convs
  std::size_t s_units = 16;
  Pooling pooling = Pooling::kMaxOverFrames;
  std::size_t att_dim = 32;
  std::size_t dec_layers = 1;
  std::size_t dec_units = 32;
  std::size_t embed_dim = 8;
  std::string graphemes = " abcdefghij";
  double init_scale = 0.05;

  /// Desk-scale defaults for a variant. mask_based uses a convolutional plus
  /// one bidirectional recurrent speaker encoder with last-state pooling.
  static ModelConfig desk(Variant v) {
    ModelConfig c;
    c.variant = v;
    if (v == Variant::kMaskBased) {
      c.s_rnn_layers = 1;
      c.pooling = Pooling::kLastState;
    }
    return c;
  }

  /// Full-size topology: 64-dim features, 3 convs (2x time, 8x frequency
  /// down-sampling), 3 BiLSTM x 320 encoder, 3 LSTM x 320 decoder.
  static ModelConfig full_scale(Variant v) {
    ModelConfig c = desk(v);
    c.feat_dim = 64;
    c.conv = {{32, 3, 3, 2, 2, Activation::kRelu},
              {32, 3, 3, 1, 2, Activation::kRelu},
              {32, 3, 3, 1, 2, Activation::kRelu}};
    c.s_conv = c.conv;
    c.enc_layers = 3;
    c.enc_units = 320;
    c.s_units = 320;
    c.att_dim = 320;
    c.dec_layers = 3;
    c.dec_units = 320;
    c.embed_dim = 64;
    return c;
  }

  bool has_anchor() const { return variant != Variant::kBaseline; }

  ConvStack encoder_conv() const { return {feat_dim, conv}; }
  ConvStack speaker_conv() const { return {feat_dim, s_conv}; }

  std::size_t time_stride() const { return encoder_conv().time_stride(); }
  std::size_t enc_dim() const {
    return enc_layers ? 2 * enc_units : encoder_conv().out_dim();
  }
  std::size_t s_dim() const {
    return s_rnn_layers ? 2 * s_units : speaker_conv().out_dim();
  }
  Vocabulary vocabulary() const { return Vocabulary(graphemes); }

  void validate() const {
    require(feat_dim >= 1, "model: feat_dim must be positive");
    require(dec_layers >= 1, "model: decoder needs at least one layer");
    require(dec_units >= 1 && att_dim >= 1 && embed_dim >= 1,
            "model: decoder sizes must be positive");
    require(!enc_layers || enc_units >= 1, "model: encoder units must be positive");
    encoder_conv().geometries();
    if (has_anchor()) {
      speaker_conv().geometries();
      require(speaker_conv().time_stride() == time_stride(),
              "model: speaker encoder must down-sample time like the encoder");
      require(!s_rnn_layers || s_units >= 1, "model: speaker units must be positive");
    }
    vocabulary();
  }

  static const std::set<std::string> &keys() {
    static const std::set<std::string> k{
        "variant", "feat_dim", "conv", "enc_layers", "enc_units", "s_conv",
        "s_rnn_layers", "s_units", "pooling", "att_dim", "dec_layers",
        "dec_units", "embed_dim", "graphemes", "init_scale", "preset"};
    return k;
  }

  /// Reads `model.`-section keys; unspecified keys take the desk (or
  /// `preset = full`) defaults for the chosen variant.
  static ModelConfig from(const KeyValues &kv) {
    kv.check_known(keys(), "model");
    const Variant v = parse_variant(kv.get_string("variant", "baseline"));
    const std::string preset = kv.get_string("preset", "desk");
    if (preset != "desk" && preset != "full")
      throw ConfigError("unknown model preset '" + preset + "'");
    ModelConfig c = preset == "full" ? full_scale(v) : desk(v);
    c.feat_dim = kv.get_size("feat_dim", c.feat_dim);
    if (auto s = kv.get("conv")) c.conv = parse_conv_layers(*s);
    c.enc_layers = kv.get_size("enc_layers", c.enc_layers);
    c.enc_units = kv.get_size("enc_units", c.enc_units);
    if (auto s = kv.get("s_conv")) c.s_conv = parse_conv_layers(*s);
    c.s_rnn_layers = kv.get_size("s_rnn_layers", c.s_rnn_layers);
    c.s_units = kv.get_size("s_units", c.s_units);
    if (auto s = kv.get("pooling")) c.pooling = parse_pooling(*s);
    c.att_dim = kv.get_size("att_dim", c.att_dim);
    c.dec_layers = kv.get_size("dec_layers", c.dec_layers);
    c.dec_units = kv.get_size("dec_units", c.dec_units);
    c.embed_dim = kv.get_size("embed_dim", c.embed_dim);
    if (auto s = kv.get("graphemes")) {
      std::string g = *s;
      if (g.size() >= 2 && g.front() == '"' && g.back() == '"') g = g.substr(1, g.size() - 2);
      c.graphemes = g;
    }
    c.init_scale = kv.get_double("init_scale", c.init_scale);
    c.validate();
    return c;
  }

  KeyValues to_key_values() const {
    KeyValues kv;
    kv.set("variant", to_string(variant));
    kv.set("feat_dim", std::to_string(feat_dim));
    kv.set("conv", conv_layers_to_string(conv));
    kv.set("enc_layers", std::to_string(enc_layers));
    kv.set("enc_units", std::to_string(enc_units));
    kv.set("s_conv", conv_layers_to_string(s_conv));
    kv.set("s_rnn_layers", std::to_string(s_rnn_layers));
    kv.set("s_units", std::to_string(s_units));
    kv.set("pooling", to_string(pooling));
    kv.set("att_dim", std::to_string(att_dim));
    kv.set("dec_layers", std::to_string(dec_layers));
    kv.set("dec_units", std::to_string(dec_units));
    kv.set("embed_dim", std::to_string(embed_dim));
    kv.set("graphemes", "\"" + graphemes + "\"");
    kv.set("init_scale", format_double(init_scale));
    return kv;
  }

  std::string canonical() const { return to_key_values().canonical(); }

  friend bool operator==(const ModelConfig &a, const ModelConfig &b) {
    return a.canonical() == b.canonical();
  }
};

/// Parameter tensors for `cfg`, initialized uniformly in
/// [-init_scale, init_scale] except the anchor gain g, which starts at 0.
inline ParameterSet init_parameters(const ModelConfig &cfg, std::uint64_t seed) {
  cfg.validate();
  ParameterSet p;
  add_conv_params(p, "enc", cfg.encoder_conv());
  std::size_t in = cfg.encoder_conv().out_dim();
  for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
    const std::string pre = "enc.lstm" + std::to_string(l);
    add_lstm_params(p, pre + ".fw", in, cfg.enc_units);
    add_lstm_params(p, pre + ".bw", in, cfg.enc_units);
    in = 2 * cfg.enc_units;
  }
  if (cfg.has_anchor()) {
    add_conv_params(p, "senc", cfg.speaker_conv());
    std::size_t sin = cfg.speaker_conv().out_dim();
    for (std::size_t l = 0; l < cfg.s_rnn_layers; ++l) {
      const std::string pre = "senc.lstm" + std::to_string(l);
      add_lstm_params(p, pre + ".fw", sin, cfg.s_units);
      add_lstm_params(p, pre + ".bw", sin, cfg.s_units);
      sin = 2 * cfg.s_units;
    }
    p["g"] = Tensor({1});
  }
  const std::size_t D = cfg.enc_dim(), V = cfg.vocabulary().size();
  p["att.Wq"] = Tensor({cfg.att_dim, cfg.dec_units});
  p["att.Wh"] = Tensor({cfg.att_dim, D});
  p["att.b"] = Tensor({cfg.att_dim});
  p["att.v"] = Tensor({cfg.att_dim});
  p["dec.embed"] = Tensor({V, cfg.embed_dim});
  for (std::size_t l = 0; l < cfg.dec_layers; ++l)
    add_lstm_params(p, "dec.lstm" + std::to_string(l),
                    (l == 0 ? cfg.embed_dim : cfg.dec_units) + D, cfg.dec_units);
  p["out.W"] = Tensor({V, cfg.dec_units + D});
  p["out.b"] = Tensor({V});

  Rng rng(seed);
  init_uniform(p, rng, cfg.init_scale);
  if (cfg.has_anchor()) p["g"][0] = 0.0;
  return p;
}

struct Model {
  ModelConfig config;
  ParameterSet params;

  static Model create(const ModelConfig &cfg, std::uint64_t seed) {
    return {cfg, init_parameters(cfg, seed)};
  }
};

/// Options for testing and batching.
struct ForwardOptions {
  /// Replace phi_t by this constant (mask_based only).
  std::optional<double> phi_override;
  /// Per encoder frame validity; invalid frames get zero attention mass.
  std::optional<std::vector<bool>> frame_valid;
};

// ---------------------------------------------------------------------------
// Graph construction

/// Encoder-side quantities recorded on a tape.
struct EncodedVars {
  Var h;          // [T, D]
  Var u;          // [T, Ds]   anchor variants
  Var w_tilde;    // [Ds]      anchor variants
  Var phi;        // [T]       similarity (multi_source) or gate (mask_based)
  Var keys;       // h, or phi-scaled h for mask_based
  Var keys_proj;  // keys W^h^T  [T, A]
  Var energy_bias;  // g * phi (multi_source)
  std::size_t T = 0;
  std::vector<bool> valid;
};

struct DecoderVars {
  Var Wq, b, v;
  Var embed;
  std::vector<LstmVars> layers;
  Var Wf, bf;
};

struct DecoderState {
  std::vector<LstmState> layers;
  Var context;
};

struct DecoderStep {
  DecoderState state;
  Var logits;
  Var alpha;
};

namespace detail {

inline Var run_encoder(Tape &tape, const ModelConfig &cfg, const ParameterSet &params,
                       Var x) {
  Var seq = conv_stack_forward(tape, x, cfg.encoder_conv(), params, "enc");
  for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
    const std::string pre = "enc.lstm" + std::to_string(l);
    seq = bilstm(tape, seq, lstm_vars(tape, params, pre + ".fw"),
                 lstm_vars(tape, params, pre + ".bw"));
  }
  return seq;
}

inline Var run_speaker_encoder(Tape &tape, const ModelConfig &cfg,
                               const ParameterSet &params, Var x) {
  Var seq = conv_stack_forward(tape, x, cfg.speaker_conv(), params, "senc");
  for (std::size_t l = 0; l < cfg.s_rnn_layers; ++l) {
    const std::string pre = "senc.lstm" + std::to_string(l);
    seq = bilstm(tape, seq, lstm_vars(tape, params, pre + ".fw"),
                 lstm_vars(tape, params, pre + ".bw"));
  }
  return seq;
}

inline Var pool(Tape &tape, Var seq, Pooling pooling) {
  if (pooling == Pooling::kMaxOverFrames) return ops::max_rows(tape, seq);
  return ops::row(tape, seq, tape.value(seq).rows() - 1);
}

}  // namespace detail

/// Speaker encoder on anchor and body: (pooled anchor vector, body sequence).
inline std::pair<Var, Var> s_encode(Tape &tape, const ModelConfig &cfg,
                                    const ParameterSet &params, Var anchor, Var body) {
  Var wseq = detail::run_speaker_encoder(tape, cfg, params, anchor);
  Var u = detail::run_speaker_encoder(tape, cfg, params, body);
  return {detail::pool(tape, wseq, cfg.pooling), u};
}

/// Speaker path only: phi for the anchor variants.
inline Var anchor_similarity(Tape &tape, const ModelConfig &cfg,
                             const ParameterSet &params, Var anchor, Var body,
                             Var *u_out = nullptr, Var *w_out = nullptr) {
  auto [w, u] = s_encode(tape, cfg, params, anchor, body);
  if (u_out) *u_out = u;
  if (w_out) *w_out = w;
  Var sim = ops::rows_dot(tape, u, w);
  if (cfg.variant != Variant::kMaskBased) return sim;
  Var g = tape.parameter("g", get_param(params, "g"));
  return ops::sigmoid(tape, ops::scalar_mul(tape, g, sim));
}

inline EncodedVars encode_sample(Tape &tape, const Model &model,
                                 const AnchoredUtterance &sample,
                                 const ForwardOptions &opts = {}) {
  const auto &cfg = model.config;
  const auto &params = model.params;
  require(sample.body.dim == cfg.feat_dim,
          "sample " + sample.id + " has feature dim " + std::to_string(sample.body.dim) +
              ", model expects " + std::to_string(cfg.feat_dim));
  EncodedVars enc;
  Var x = tape.constant(sample.body.to_tensor());
  enc.h = detail::run_encoder(tape, cfg, params, x);
  enc.T = tape.value(enc.h).rows();
  enc.valid = opts.frame_valid.value_or(std::vector<bool>(enc.T, true));
  require(enc.valid.size() == enc.T, "frame validity length does not match encoder frames");
  enc.keys = enc.h;

  if (cfg.has_anchor()) {
    require(sample.anchor.dim == cfg.feat_dim, "anchor feature dim mismatch");
    Var a = tape.constant(sample.anchor.to_tensor());
    if (cfg.variant == Variant::kMaskBased && opts.phi_override) {
      enc.phi = tape.constant(Tensor({enc.T}, *opts.phi_override));
    } else {
      enc.phi = anchor_similarity(tape, cfg, params, a, x, &enc.u, &enc.w_tilde);
      require(tape.value(enc.u).rows() == enc.T,
              "speaker encoder produced " + std::to_string(tape.value(enc.u).rows()) +
                  " frames, encoder " + std::to_string(enc.T));
    }
    Var g = tape.parameter("g", get_param(params, "g"));
    if (cfg.variant == Variant::kMultiSource)
      enc.energy_bias = ops::scalar_mul(tape, g, enc.phi);
    else
      enc.keys = ops::scale_rows(tape, enc.h, enc.phi);
  }
  Var Wh = tape.parameter("att.Wh", get_param(params, "att.Wh"));
  enc.keys_proj = ops::matmul_nt(tape, enc.keys, Wh);
  return enc;
}

inline DecoderVars decoder_vars(Tape &tape, const Model &model) {
  const auto &p = model.params;
  DecoderVars d;
  d.Wq = tape.parameter("att.Wq", get_param(p, "att.Wq"));
  d.b = tape.parameter("att.b", get_param(p, "att.b"));
  d.v = tape.parameter("att.v", get_param(p, "att.v"));
  d.embed = tape.parameter("dec.embed", get_param(p, "dec.embed"));
  for (std::size_t l = 0; l < model.config.dec_layers; ++l)
    d.layers.push_back(lstm_vars(tape, p, "dec.lstm" + std::to_string(l)));
  d.Wf = tape.parameter("out.W", get_param(p, "out.W"));
  d.bf = tape.parameter("out.b", get_param(p, "out.b"));
  return d;
}

inline DecoderState initial_decoder_state(Tape &tape, const ModelConfig &cfg) {
  DecoderState s;
  for (std::size_t l = 0; l < cfg.dec_layers; ++l)
    s.layers.push_back(lstm_zero_state(tape, cfg.dec_units));
  s.context = tape.constant(Tensor({cfg.enc_dim()}));
  return s;
}

/// Attention weights for query state q over the encoded frames.
inline Var attend(Tape &tape, const DecoderVars &dv, const EncodedVars &enc, Var q) {
  Var qproj = ops::affine(tape, dv.Wq, q, dv.b);
  Var energies = ops::additive_energies(tape, enc.keys_proj, qproj, dv.v);
  if (enc.energy_bias.valid()) energies = ops::add(tape, energies, enc.energy_bias);
  return ops::softmax(tape, energies, &enc.valid);
}

inline DecoderStep decoder_step(Tape &tape, const DecoderVars &dv, const EncodedVars &enc,
                                const DecoderState &prev, std::size_t y_prev) {
  const std::size_t V = tape.value(dv.embed).rows();
  require(y_prev < V, "decoder input symbol " + std::to_string(y_prev) +
                          " is outside the vocabulary of " + std::to_string(V));
  DecoderStep out;
  Var emb = ops::row(tape, dv.embed, y_prev);
  Var x = ops::concat(tape, {emb, prev.context});
  out.state.layers.push_back(lstm_step(tape, x, prev.layers[0], dv.layers[0]));
  out.alpha = attend(tape, dv, enc, out.state.layers[0].h);
  out.state.context = ops::weighted_row_sum(tape, enc.keys, out.alpha);
  for (std::size_t l = 1; l < dv.layers.size(); ++l) {
    Var xin = ops::concat(tape, {out.state.layers[l - 1].h, out.state.context});
    out.state.layers.push_back(lstm_step(tape, xin, prev.layers[l], dv.layers[l]));
  }
  Var top = ops::concat(tape, {out.state.layers.back().h, out.state.context});
  out.logits = ops::affine(tape, dv.Wf, top, dv.bf);
  return out;
}

struct ForwardVars {
  EncodedVars enc;
  std::vector<Var> logits;
  std::vector<Var> alpha;
};

/// Teacher-forced pass: inputs are <s>, targets[0..N-2].
inline ForwardVars build_forward(Tape &tape, const Model &model,
                                 const AnchoredUtterance &sample,
                                 std::span<const std::size_t> targets,
                                 const ForwardOptions &opts = {}) {
  require(!targets.empty() && targets.back() == Vocabulary::kEos,
          "targets must end with end-of-sequence");
  ForwardVars fv;
  fv.enc = encode_sample(tape, model, sample, opts);
  const DecoderVars dv = decoder_vars(tape, model);
  DecoderState state = initial_decoder_state(tape, model.config);
  std::size_t y_prev = Vocabulary::kSos;
  for (std::size_t n = 0; n < targets.size(); ++n) {
    DecoderStep step = decoder_step(tape, dv, fv.enc, state, y_prev);
    fv.logits.push_back(step.logits);
    fv.alpha.push_back(step.alpha);
    state = std::move(step.state);
    y_prev = targets[n];
  }
  return fv;
}

// ---------------------------------------------------------------------------
// Plain-tensor API

struct ForwardTrace {
  Tensor h;
  std::optional<Tensor> u;
  std::optional<Tensor> w_tilde;
  std::optional<Tensor> phi;
  Tensor alpha;   // [N, T]
  Tensor logits;  // [N, V]
};

inline Tensor stack_values(const Tape &tape, std::span<const Var> rows) {
  const std::size_t d = tape.value(rows[0]).size();
  Tensor out({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto &v = tape.value(rows[r]).values();
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

inline ForwardTrace forward(const Model &model, const AnchoredUtterance &sample,
                            std::span<const std::size_t> targets,
                            const ForwardOptions &opts = {}) {
  Tape tape(false);
  const auto fv = build_forward(tape, model, sample, targets, opts);
  ForwardTrace tr;
  tr.h = tape.value(fv.enc.h);
  if (fv.enc.u.valid()) tr.u = tape.value(fv.enc.u);
  if (fv.enc.w_tilde.valid()) tr.w_tilde = tape.value(fv.enc.w_tilde);
  if (fv.enc.phi.valid()) tr.phi = tape.value(fv.enc.phi);
  tr.alpha = stack_values(tape, fv.alpha);
  tr.logits = stack_values(tape, fv.logits);
  return tr;
}

/// h_{1:T} for a body (encoder only).
inline Tensor encode(const Model &model, const FeatureSequence &x) {
  require(x.dim == model.config.feat_dim, "encode: feature dim mismatch");
  Tape tape(false);
  return tape.value(
      detail::run_encoder(tape, model.config, model.params, tape.constant(x.to_tensor())));
}

/// (w_tilde, u_{1:T}) from the speaker encoder.
inline std::pair<Tensor, Tensor> s_encode(const Model &model, const FeatureSequence &anchor,
                                          const FeatureSequence &body) {
  require(model.config.has_anchor(), "s_encode: variant has no speaker encoder");
  Tape tape(false);
  auto [w, u] = s_encode(tape, model.config, model.params,
                         tape.constant(anchor.to_tensor()), tape.constant(body.to_tensor()));
  return {tape.value(w), tape.value(u)};
}

/// Additive attention energy v . tanh(Wq q + Wh h + b) for one frame.
inline double attention_energy(const Tensor &q, const Tensor &h, const ParameterSet &params) {
  Tape tape(false);
  Var Wq = tape.reference(get_param(params, "att.Wq"));
  Var Wh = tape.reference(get_param(params, "att.Wh"));
  Var b = tape.reference(get_param(params, "att.b"));
  Var v = tape.reference(get_param(params, "att.v"));
  Var hq = ops::add(tape, ops::affine(tape, Wq, tape.reference(q), b),
                    ops::affine(tape, Wh, tape.reference(h)));
  return tape.value(ops::dot(tape, v, ops::tanh(tape, hq)))[0];
}

struct Attended {
  Tensor alpha;    // [T]
  Tensor context;  // [D]
};

/// softmax(omega_t + g * (u_t . w)) and the matching context over h.
inline Attended multi_source_attend(const Tensor &q, const Tensor &h, const Tensor &u,
                                    const Tensor &w_tilde, double g,
                                    const ParameterSet &params,
                                    const std::vector<bool> *valid = nullptr) {
  require(h.rows() == u.rows(), "multi_source_attend: h and u lengths differ");
  Tape tape(false);
  EncodedVars enc;
  enc.T = h.rows();
  enc.valid = valid ? *valid : std::vector<bool>(enc.T, true);
  enc.keys = tape.reference(h);
  enc.keys_proj = ops::matmul_nt(tape, enc.keys, tape.reference(get_param(params, "att.Wh")));
  Var phi = ops::rows_dot(tape, tape.reference(u), tape.reference(w_tilde));
  enc.energy_bias = ops::scale(tape, phi, g);
  DecoderVars dv;
  dv.Wq = tape.reference(get_param(params, "att.Wq"));
  dv.b = tape.reference(get_param(params, "att.b"));
  dv.v = tape.reference(get_param(params, "att.v"));
  Var alpha = attend(tape, dv, enc, tape.reference(q));
  Var c = ops::weighted_row_sum(tape, enc.keys, alpha);
  return {tape.value(alpha), tape.value(c)};
}

struct Masked {
  Tensor phi;       // [T]
  Tensor masked_h;  // [T, D]
};

/// phi_t = sigmoid(g * (u_t . w)); h_t scaled by phi_t.
inline Masked mask_frames(const Tensor &h, const Tensor &u, const Tensor &w_tilde, double g) {
  require(h.rows() == u.rows(), "mask_frames: h and u lengths differ");
  Tape tape(false);
  Var sim = ops::rows_dot(tape, tape.reference(u), tape.reference(w_tilde));
  Var phi = ops::sigmoid(tape, ops::scale(tape, sim, g));
  Var mh = ops::scale_rows(tape, tape.reference(h), phi);
  return {tape.value(phi), tape.value(mh)};
}

// ---------------------------------------------------------------------------
// Checkpoint file: "ANCK" | version u32 | config (u32 len + UTF-8 canonical
// text) | count u32 | (name u16+UTF-8 | rank u8 | dims u32* | f64*)*

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> serialize_checkpoint(const Model &model) {
  ByteWriter w;
  w.raw("ANCK");
  w.u32(kCheckpointVersion);
  w.str32(model.config.canonical());
  w.u32(static_cast<std::uint32_t>(model.params.size()));
  for (const auto &[name, t] : model.params) {
    w.str16(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.values()) w.f64(v);
  }
  return w.bytes();
}

inline Model deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.raw(4) != "ANCK") throw Error("not a checkpoint file (bad magic)");
  if (auto v = r.u32(); v != kCheckpointVersion)
    throw Error("unsupported checkpoint version " + std::to_string(v));
  Model m;
  m.config = ModelConfig::from(KeyValues::parse(r.str32()));
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str16();
    const auto rank = r.u8();
    Shape shape(rank);
    for (auto &d : shape) d = r.u32();
    Tensor t(shape);
    r.need(t.size() * 8);
    for (auto &v : t.values()) v = r.f64();
    m.params.emplace(std::move(name), std::move(t));
  }
  if (r.remaining()) throw Error("trailing bytes after checkpoint parameters");
  const auto expected = init_parameters(m.config, 0);
  require(expected.size() == m.params.size(), "checkpoint parameter set does not match its config");
  for (const auto &[name, t] : expected)
    require(m.params.count(name) && m.params.at(name).shape() == t.shape(),
            "checkpoint parameter '" + name + "' missing or misshaped");
  return m;
}

inline void write_checkpoint(const Model &model, const std::string &path) {
  write_file_bytes(path, serialize_checkpoint(model));
}

inline Model read_checkpoint(const std::string &path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

}  // namespace anchor
