// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   layers.hpp
 * @brief  Recurrent and convolutional building blocks on top of ops.hpp.
 */
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "anchor/numerics/ops.hpp"
#include "anchor/numerics/rng.hpp"

namespace anchor {

inline const Tensor &get_param(const ParameterSet &params,
                               const std::string &name) {
  auto it = params.find(name);
  require(it != params.end(), "missing parameter '" + name + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// LSTM

struct LstmVars {
  Var Wx, Wh, b;
};

struct LstmState {
  Var h, c;
};

inline LstmVars lstm_vars(Tape &tape, const ParameterSet &params,
                          const std::string &prefix) {
  return {tape.parameter(prefix + ".Wx", get_param(params, prefix + ".Wx")),
          tape.parameter(prefix + ".Wh", get_param(params, prefix + ".Wh")),
          tape.parameter(prefix + ".b", get_param(params, prefix + ".b"))};
}

inline void add_lstm_params(ParameterSet &params, const std::string &prefix,
                            std::size_t input_dim, std::size_t units) {
  params[prefix + ".Wx"] = Tensor({4 * units, input_dim});
  params[prefix + ".Wh"] = Tensor({4 * units, units});
  params[prefix + ".b"] = Tensor({4 * units});
}

inline LstmState lstm_zero_state(Tape &tape, std::size_t units) {
  return {tape.constant(Tensor({units})), tape.constant(Tensor({units}))};
}

inline LstmState lstm_step(Tape &tape, Var x, LstmState prev,
                           const LstmVars &p) {
  const std::size_t H = tape.value(prev.h).size();
  Var gates = ops::add(tape, ops::affine(tape, p.Wx, x, p.b),
                       ops::affine(tape, p.Wh, prev.h));
  Var hc = ops::lstm_pointwise(tape, gates, prev.c);
  return {ops::slice(tape, hc, 0, H), ops::slice(tape, hc, H, H)};
}

/// Runs one direction over `inputs`; outputs are returned in input order.
inline std::vector<Var> run_lstm(Tape &tape, std::span<const Var> inputs,
                                 const LstmVars &p, bool reverse) {
  const std::size_t H = tape.value(p.Wh).cols();
  LstmState s = lstm_zero_state(tape, H);
  std::vector<Var> out(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t t = reverse ? inputs.size() - 1 - k : k;
    s = lstm_step(tape, inputs[t], s, p);
    out[t] = s.h;
  }
  return out;
}

/// Bidirectional layer over a [T,d] sequence -> [T, 2H], forward half first.
inline Var bilstm(Tape &tape, Var seq, const LstmVars &fw, const LstmVars &bw) {
  const auto rows = ops::unstack_rows(tape, seq);
  const auto f = run_lstm(tape, rows, fw, false);
  const auto b = run_lstm(tape, rows, bw, true);
  std::vector<Var> cat(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t)
    cat[t] = ops::concat(tape, {f[t], b[t]});
  return ops::stack_rows(tape, cat);
}

struct LstmCellParams {
  Tensor Wx;  // [4H, in]
  Tensor Wh;  // [4H, H]
  Tensor b;   // [4H]
};

/// One canonical LSTM step on plain tensors; returns (hidden, cell).
inline std::pair<Tensor, Tensor> lstm_cell_step(const Tensor &input,
                                                const Tensor &hidden,
                                                const Tensor &cell,
                                                const LstmCellParams &params) {
  const std::size_t H = hidden.size();
  require(params.Wh.rank() == 2 && params.Wh.rows() == 4 * H &&
              params.Wh.cols() == H,
          "lstm_cell_step: recurrent weights do not match hidden size");
  require(cell.size() == H, "lstm_cell_step: cell size mismatch");
  require(params.Wx.rank() == 2 && params.Wx.rows() == 4 * H &&
              params.Wx.cols() == input.size(),
          "lstm_cell_step: input weights " + shape_str(params.Wx.shape()) +
              " do not match input " + shape_str(input.shape()));
  Tape tape(false);
  LstmVars p{tape.reference(params.Wx), tape.reference(params.Wh),
             tape.reference(params.b)};
  auto s = lstm_step(tape, tape.reference(input),
                     {tape.reference(hidden), tape.reference(cell)}, p);
  return {tape.value(s.h), tape.value(s.c)};
}

// ---------------------------------------------------------------------------
// Convolutional front-end

struct ConvLayerSpec {
  std::size_t channels = 1;
  std::size_t kernel_time = 1;
  std::size_t kernel_freq = 1;
  std::size_t stride_time = 1;
  std::size_t stride_freq = 1;
  Activation activation = Activation::kTanh;

  friend bool operator==(const ConvLayerSpec &, const ConvLayerSpec &) = default;
};

/// A stack of conv layers applied to [L, feat_dim] input (one input channel).
struct ConvStack {
  std::size_t feat_dim = 1;
  std::vector<ConvLayerSpec> layers;

  std::vector<ops::ConvGeometry> geometries() const {
    std::vector<ops::ConvGeometry> out;
    std::size_t ch = 1, freq = feat_dim;
    for (const auto &l : layers) {
      require(l.channels >= 1 && l.kernel_time >= 1 && l.kernel_freq >= 1 &&
                  l.stride_time >= 1 && l.stride_freq >= 1,
              "conv layer sizes must be positive");
      ops::ConvGeometry g{ch, freq, l.channels, l.kernel_time,
                          l.kernel_freq, l.stride_time, l.stride_freq};
      out.push_back(g);
      ch = g.out_channels;
      freq = g.out_freq();
    }
    return out;
  }

  std::size_t time_stride() const {
    std::size_t s = 1;
    for (const auto &l : layers) s *= l.stride_time;
    return s;
  }

  std::size_t out_dim() const {
    if (layers.empty()) return feat_dim;
    return geometries().back().out_dim();
  }

  /// Output length is a function of the input length only.
  std::size_t out_frames(std::size_t in_frames) const {
    for (const auto &l : layers)
      in_frames = (in_frames + l.stride_time - 1) / l.stride_time;
    return in_frames;
  }
};

inline void add_conv_params(ParameterSet &params, const std::string &prefix,
                            const ConvStack &stack) {
  const auto geos = stack.geometries();
  for (std::size_t i = 0; i < geos.size(); ++i) {
    const std::string p = prefix + ".conv" + std::to_string(i);
    params[p + ".W"] = Tensor({geos[i].out_channels, geos[i].kernel_size()});
    params[p + ".b"] = Tensor({geos[i].out_channels});
  }
}

inline Var conv_stack_forward(Tape &tape, Var x, const ConvStack &stack,
                              const ParameterSet &params,
                              const std::string &prefix) {
  const std::size_t L = tape.value(x).rows();
  require(L >= stack.time_stride(),
          "input of " + std::to_string(L) +
              " frames is shorter than the receptive field (" +
              std::to_string(stack.time_stride()) + " frames)");
  const auto geos = stack.geometries();
  for (std::size_t i = 0; i < geos.size(); ++i) {
    const std::string p = prefix + ".conv" + std::to_string(i);
    Var W = tape.parameter(p + ".W", get_param(params, p + ".W"));
    Var b = tape.parameter(p + ".b", get_param(params, p + ".b"));
    x = ops::activate(tape, ops::conv2d(tape, x, W, b, geos[i]),
                      stack.layers[i].activation);
  }
  return x;
}

/// Plain-tensor front-end: [L, feat_dim] -> [ceil(L/stride), out_dim].
inline Tensor conv_downsample(const Tensor &features, const ConvStack &stack,
                              const ParameterSet &params,
                              const std::string &prefix = "conv") {
  require(features.rank() == 2 && features.cols() == stack.feat_dim,
          "conv_downsample: features " + shape_str(features.shape()) +
              " do not match feat_dim " + std::to_string(stack.feat_dim));
  Tape tape(false);
  Var y = conv_stack_forward(tape, tape.reference(features), stack, params,
                             prefix);
  return tape.value(y);
}

/// Uniform initialization of every tensor in place.
inline void init_uniform(ParameterSet &params, Rng &rng, double scale) {
  for (auto &[name, t] : params)
    for (auto &v : t.values()) v = rng.uniform(-scale, scale);
}

}  // namespace anchor
