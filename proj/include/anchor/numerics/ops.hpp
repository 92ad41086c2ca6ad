// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   ops.hpp
 * @brief  Differentiable primitives recorded on a Tape.
 *
 * Conventions: vectors are rank-1 tensors, sequences are rank-2 tensors laid
 * out time-major (rows are frames), scalars are shape (1). Each op checks
 * operand shapes and throws anchor::Error on mismatch.
 */
#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "anchor/numerics/tape.hpp"

namespace anchor {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Max-subtracted softmax over a non-empty, finite sequence.
inline std::vector<double> softmax(std::span<const double> energies) {
  require(!energies.empty(), "softmax: empty input");
  double mx = -INFINITY;
  for (double e : energies) {
    require(std::isfinite(e), "softmax: non-finite input");
    mx = std::max(mx, e);
  }
  std::vector<double> out(energies.size());
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(energies[i] - mx);
    z += out[i];
  }
  for (auto &p : out) p /= z;
  return out;
}

/// log-sum-exp based log softmax.
inline std::vector<double> log_softmax(std::span<const double> logits) {
  require(!logits.empty(), "log_softmax: empty input");
  double mx = -INFINITY;
  for (double e : logits) mx = std::max(mx, e);
  double z = 0.0;
  for (double e : logits) z += std::exp(e - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

enum class Activation { kLinear, kTanh, kRelu, kSigmoid };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

inline Activation parse_activation(const std::string &s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  throw Error("unknown activation '" + s + "'");
}

namespace ops {

namespace detail {

inline void expect_rank(const Tensor &t, std::size_t rank, const char *op) {
  require(t.rank() == rank, std::string(op) + ": expected rank " +
                                std::to_string(rank) + ", got shape " +
                                shape_str(t.shape()));
}

inline bool any_grad(const Tape &t, std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (v.valid() && t.requires_grad(v)) return true;
  return false;
}

}  // namespace detail

/// y = W x + b  (W: [m,n], x: [n], b: [m] or invalid).
inline Var affine(Tape &tape, Var W, Var x, Var b = {}) {
  const Tensor &w = tape.value(W);
  const Tensor &xv = tape.value(x);
  detail::expect_rank(w, 2, "affine");
  detail::expect_rank(xv, 1, "affine");
  const std::size_t m = w.rows(), n = w.cols();
  require(xv.size() == n, "affine: W is " + shape_str(w.shape()) +
                              " but x is " + shape_str(xv.shape()));
  Tensor y({m});
  if (b.valid()) {
    const Tensor &bv = tape.value(b);
    require(bv.size() == m, "affine: bias size mismatch");
    for (std::size_t i = 0; i < m; ++i) y[i] = bv[i];
  }
  const double *wp = w.data().data();
  const double *xp = xv.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    const double *wr = wp + i * n;
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * xp[j];
    y[i] += acc;
  }
  Var out;
  out = tape.push(std::move(y), detail::any_grad(tape, {W, x, b}),
                  [W, x, b, m, n, id = tape.size()](Tape &t) {
                    const Tensor &gy = *t.grad(Var(id));
                    const double *gp = gy.data().data();
                    if (t.requires_grad(W)) {
                      const double *xp = t.value(x).data().data();
                      double *gw = t.grad_slot(W).data().data();
                      for (std::size_t i = 0; i < m; ++i) {
                        const double g = gp[i];
                        if (g == 0.0) continue;
                        double *row = gw + i * n;
                        for (std::size_t j = 0; j < n; ++j) row[j] += g * xp[j];
                      }
                    }
                    if (t.requires_grad(x)) {
                      const double *wp = t.value(W).data().data();
                      double *gx = t.grad_slot(x).data().data();
                      for (std::size_t i = 0; i < m; ++i) {
                        const double g = gp[i];
                        if (g == 0.0) continue;
                        const double *row = wp + i * n;
                        for (std::size_t j = 0; j < n; ++j) gx[j] += g * row[j];
                      }
                    }
                    if (b.valid() && t.requires_grad(b)) {
                      double *gb = t.grad_slot(b).data().data();
                      for (std::size_t i = 0; i < m; ++i) gb[i] += gp[i];
                    }
                  });
  return out;
}

/// Y = A W^T  (A: [T,n], W: [m,n]) -> [T,m].
inline Var matmul_nt(Tape &tape, Var A, Var W) {
  const Tensor &a = tape.value(A);
  const Tensor &w = tape.value(W);
  detail::expect_rank(a, 2, "matmul_nt");
  detail::expect_rank(w, 2, "matmul_nt");
  const std::size_t T = a.rows(), n = a.cols(), m = w.rows();
  require(w.cols() == n, "matmul_nt: inner dimension mismatch " +
                             shape_str(a.shape()) + " x " +
                             shape_str(w.shape()) + "^T");
  Tensor y({T, m});
  for (std::size_t t = 0; t < T; ++t) {
    auto ar = a.row(t);
    for (std::size_t i = 0; i < m; ++i) {
      auto wr = w.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += ar[j] * wr[j];
      y.at(t, i) = acc;
    }
  }
  return tape.push(std::move(y), detail::any_grad(tape, {A, W}),
                   [A, W, T, n, m, id = tape.size()](Tape &tp) {
                     const Tensor &gy = *tp.grad(Var(id));
                     if (tp.requires_grad(A)) {
                       const Tensor &w = tp.value(W);
                       Tensor &ga = tp.grad_slot(A);
                       for (std::size_t t = 0; t < T; ++t)
                         for (std::size_t i = 0; i < m; ++i) {
                           const double g = gy.at(t, i);
                           auto wr = w.row(i);
                           auto gr = ga.row(t);
                           for (std::size_t j = 0; j < n; ++j) gr[j] += g * wr[j];
                         }
                     }
                     if (tp.requires_grad(W)) {
                       const Tensor &a = tp.value(A);
                       Tensor &gw = tp.grad_slot(W);
                       for (std::size_t t = 0; t < T; ++t)
                         for (std::size_t i = 0; i < m; ++i) {
                           const double g = gy.at(t, i);
                           auto ar = a.row(t);
                           auto gr = gw.row(i);
                           for (std::size_t j = 0; j < n; ++j) gr[j] += g * ar[j];
                         }
                     }
                   });
}

/// y = sum_t a_t M_t  (M: [T,d], a: [T]) -> [d].
inline Var weighted_row_sum(Tape &tape, Var M, Var a) {
  const Tensor &mv = tape.value(M);
  const Tensor &av = tape.value(a);
  detail::expect_rank(mv, 2, "weighted_row_sum");
  require(av.rank() == 1 && av.size() == mv.rows(),
          "weighted_row_sum: weights " + shape_str(av.shape()) +
              " vs rows " + shape_str(mv.shape()));
  const std::size_t T = mv.rows(), d = mv.cols();
  Tensor y({d});
  for (std::size_t t = 0; t < T; ++t) {
    const double w = av[t];
    auto r = mv.row(t);
    for (std::size_t j = 0; j < d; ++j) y[j] += w * r[j];
  }
  return tape.push(std::move(y), detail::any_grad(tape, {M, a}),
                   [M, a, T, d, id = tape.size()](Tape &tp) {
                     const Tensor &gy = *tp.grad(Var(id));
                     if (tp.requires_grad(M)) {
                       const Tensor &av = tp.value(a);
                       Tensor &gm = tp.grad_slot(M);
                       for (std::size_t t = 0; t < T; ++t) {
                         auto gr = gm.row(t);
                         for (std::size_t j = 0; j < d; ++j)
                           gr[j] += av[t] * gy[j];
                       }
                     }
                     if (tp.requires_grad(a)) {
                       const Tensor &mv = tp.value(M);
                       Tensor &ga = tp.grad_slot(a);
                       for (std::size_t t = 0; t < T; ++t) {
                         auto r = mv.row(t);
                         double acc = 0.0;
                         for (std::size_t j = 0; j < d; ++j) acc += r[j] * gy[j];
                         ga[t] += acc;
                       }
                     }
                   });
}

inline Var add(Tape &tape, Var a, Var b) {
  const Tensor &av = tape.value(a);
  const Tensor &bv = tape.value(b);
  require(av.shape() == bv.shape(), "add: shape mismatch " +
                                        shape_str(av.shape()) + " vs " +
                                        shape_str(bv.shape()));
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return tape.push(std::move(y), detail::any_grad(tape, {a, b}),
                   [a, b, id = tape.size()](Tape &t) {
                     const Tensor &gy = *t.grad(Var(id));
                     for (Var v : {a, b}) {
                       if (!t.requires_grad(v)) continue;
                       Tensor &g = t.grad_slot(v);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
                     }
                   });
}

/// Elementwise product.
inline Var mul(Tape &tape, Var a, Var b) {
  const Tensor &av = tape.value(a);
  const Tensor &bv = tape.value(b);
  require(av.shape() == bv.shape(), "mul: shape mismatch");
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return tape.push(std::move(y), detail::any_grad(tape, {a, b}),
                   [a, b, id = tape.size()](Tape &t) {
                     const Tensor &gy = *t.grad(Var(id));
                     if (t.requires_grad(a)) {
                       const Tensor &bv = t.value(b);
                       Tensor &g = t.grad_slot(a);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         g[i] += gy[i] * bv[i];
                     }
                     if (t.requires_grad(b)) {
                       const Tensor &av = t.value(a);
                       Tensor &g = t.grad_slot(b);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         g[i] += gy[i] * av[i];
                     }
                   });
}

/// k * a for a constant k.
inline Var scale(Tape &tape, Var a, double k) {
  Tensor y = tape.value(a);
  for (auto &v : y.values()) v *= k;
  return tape.push(std::move(y), detail::any_grad(tape, {a}),
                   [a, k, id = tape.size()](Tape &t) {
                     const Tensor &gy = *t.grad(Var(id));
                     Tensor &g = t.grad_slot(a);
                     for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * gy[i];
                   });
}

/// s * a where s has shape (1).
inline Var scalar_mul(Tape &tape, Var s, Var a) {
  const Tensor &sv = tape.value(s);
  require(sv.size() == 1, "scalar_mul: scale must have one element");
  const double k = sv[0];
  Tensor y = tape.value(a);
  for (auto &v : y.values()) v *= k;
  return tape.push(std::move(y), detail::any_grad(tape, {s, a}),
                   [s, a, id = tape.size()](Tape &t) {
                     const Tensor &gy = *t.grad(Var(id));
                     if (t.requires_grad(a)) {
                       const double k = t.value(s)[0];
                       Tensor &g = t.grad_slot(a);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * gy[i];
                     }
                     if (t.requires_grad(s)) {
                       const Tensor &av = t.value(a);
                       double acc = 0.0;
                       for (std::size_t i = 0; i < av.size(); ++i)
                         acc += av[i] * gy[i];
                       t.grad_slot(s)[0] += acc;
                     }
                   });
}

inline Var activate(Tape &tape, Var a, Activation act) {
  if (act == Activation::kLinear) return a;
  Tensor y = tape.value(a);
  for (auto &v : y.values()) {
    switch (act) {
      case Activation::kTanh: v = std::tanh(v); break;
      case Activation::kRelu: v = v > 0 ? v : 0.0; break;
      case Activation::kSigmoid: v = sigmoid(v); break;
      case Activation::kLinear: break;
    }
  }
  return tape.push(std::move(y), detail::any_grad(tape, {a}),
                   [a, act, id = tape.size()](Tape &t) {
                     const Tensor &y = t.value(Var(id));
                     const Tensor &gy = *t.grad(Var(id));
                     Tensor &g = t.grad_slot(a);
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       double d = 1.0;
                       switch (act) {
                         case Activation::kTanh: d = 1.0 - y[i] * y[i]; break;
                         case Activation::kRelu: d = y[i] > 0 ? 1.0 : 0.0; break;
                         case Activation::kSigmoid: d = y[i] * (1.0 - y[i]); break;
                         case Activation::kLinear: break;
                       }
                       g[i] += d * gy[i];
                     }
                   });
}

inline Var tanh(Tape &tape, Var a) { return activate(tape, a, Activation::kTanh); }
inline Var sigmoid(Tape &tape, Var a) {
  return activate(tape, a, Activation::kSigmoid);
}

/// Concatenates rank-1 operands.
inline Var concat(Tape &tape, std::span<const Var> parts) {
  require(!parts.empty(), "concat: no operands");
  std::vector<double> y;
  std::vector<std::size_t> sizes;
  bool need = false;
  for (Var p : parts) {
    const Tensor &v = tape.value(p);
    detail::expect_rank(v, 1, "concat");
    y.insert(y.end(), v.values().begin(), v.values().end());
    sizes.push_back(v.size());
    need = need || tape.requires_grad(p);
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return tape.push(Tensor::vector(std::move(y)), need,
                   [ins = std::move(ins), sizes = std::move(sizes),
                    id = tape.size()](Tape &t) {
                     const Tensor &gy = *t.grad(Var(id));
                     std::size_t off = 0;
                     for (std::size_t k = 0; k < ins.size(); ++k) {
                       if (t.requires_grad(ins[k])) {
                         Tensor &g = t.grad_slot(ins[k]);
                         for (std::size_t i = 0; i < sizes[k]; ++i)
                           g[i] += gy[off + i];
                       }
                       off += sizes[k];
                     }
                   });
}

inline Var concat(Tape &tape, std::initializer_list<Var> parts) {
  return concat(tape, std::span<const Var>(parts.begin(), parts.size()));
}

/// a[offset, offset+len) of a rank-1 operand.
inline Var slice(Tape &tape, Var a, std::size_t offset, std::size_t len) {
  const Tensor &av = tape.value(a);
  detail::expect_rank(av, 1, "slice");
  require(len > 0 && offset + len <= av.size(), "slice: out of range");
  std::vector<double> y(av.values().begin() + offset,
                        av.values().begin() + offset + len);
  return tape.push(Tensor::vector(std::move(y)), detail::any_grad(tape, {a}),
                   [a, offset, len, id = tape.size()](Tape &t) {
                     const Tensor &gy = *t.grad(Var(id));
                     Tensor &g = t.grad_slot(a);
                     for (std::size_t i = 0; i < len; ++i) g[offset + i] += gy[i];
                   });
}

/// Stacks equal-length rank-1 operands into a [T,d] sequence.
inline Var stack_rows(Tape &tape, std::span<const Var> rows) {
  require(!rows.empty(), "stack_rows: no operands");
  const std::size_t d = tape.value(rows[0]).size();
  Tensor y({rows.size(), d});
  bool need = false;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const Tensor &r = tape.value(rows[t]);
    require(r.rank() == 1 && r.size() == d, "stack_rows: ragged rows");
    std::copy(r.values().begin(), r.values().end(), y.row(t).begin());
    need = need || tape.requires_grad(rows[t]);
  }
  std::vector<Var> ins(rows.begin(), rows.end());
  return tape.push(std::move(y), need,
                   [ins = std::move(ins), d, id = tape.size()](Tape &t) {
                     const Tensor &gy = *t.grad(Var(id));
                     for (std::size_t r = 0; r < ins.size(); ++r) {
                       if (!t.requires_grad(ins[r])) continue;
                       Tensor &g = t.grad_slot(ins[r]);
                       auto src = gy.row(r);
                       for (std::size_t j = 0; j < d; ++j) g[j] += src[j];
                     }
                   });
}

/// Row r of a [T,d] sequence.
inline Var row(Tape &tape, Var M, std::size_t r) {
  const Tensor &mv = tape.value(M);
  detail::expect_rank(mv, 2, "row");
  require(r < mv.rows(), "row: index out of range");
  auto src = mv.row(r);
  std::vector<double> y(src.begin(), src.end());
  return tape.push(Tensor::vector(std::move(y)), detail::any_grad(tape, {M}),
                   [M, r, id = tape.size()](Tape &t) {
                     const Tensor &gy = *t.grad(Var(id));
                     auto g = t.grad_slot(M).row(r);
                     for (std::size_t j = 0; j < g.size(); ++j) g[j] += gy[j];
                   });
}

/// Splits a [T,d] sequence into T row Vars (one node per row).
inline std::vector<Var> unstack_rows(Tape &tape, Var M) {
  const std::size_t T = tape.value(M).rows();
  std::vector<Var> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) out.push_back(row(tape, M, t));
  return out;
}

/// Inner product of two equal-length vectors -> (1).
inline Var dot(Tape &tape, Var a, Var b) {
  const Tensor &av = tape.value(a);
  const Tensor &bv = tape.value(b);
  require(av.size() == bv.size(), "dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return tape.push(Tensor::scalar(acc), detail::any_grad(tape, {a, b}),
                   [a, b, id = tape.size()](Tape &t) {
                     const double g = (*t.grad(Var(id)))[0];
                     if (t.requires_grad(a)) {
                       const Tensor &bv = t.value(b);
                       Tensor &ga = t.grad_slot(a);
                       for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
                     }
                     if (t.requires_grad(b)) {
                       const Tensor &av = t.value(a);
                       Tensor &gb = t.grad_slot(b);
                       for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
                     }
                   });
}

/// y_t = M_t . w  (M: [T,d], w: [d]) -> [T].
inline Var rows_dot(Tape &tape, Var M, Var w) {
  const Tensor &mv = tape.value(M);
  const Tensor &wv = tape.value(w);
  detail::expect_rank(mv, 2, "rows_dot");
  require(wv.rank() == 1 && wv.size() == mv.cols(),
          "rows_dot: vector " + shape_str(wv.shape()) + " vs rows of " +
              shape_str(mv.shape()));
  const std::size_t T = mv.rows(), d = mv.cols();
  Tensor y({T});
  for (std::size_t t = 0; t < T; ++t) {
    auto r = mv.row(t);
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += r[j] * wv[j];
    y[t] = acc;
  }
  return tape.push(std::move(y), detail::any_grad(tape, {M, w}),
                   [M, w, T, d, id = tape.size()](Tape &tp) {
                     const Tensor &gy = *tp.grad(Var(id));
                     if (tp.requires_grad(M)) {
                       const Tensor &wv = tp.value(w);
                       Tensor &gm = tp.grad_slot(M);
                       for (std::size_t t = 0; t < T; ++t) {
                         auto gr = gm.row(t);
                         for (std::size_t j = 0; j < d; ++j) gr[j] += gy[t] * wv[j];
                       }
                     }
                     if (tp.requires_grad(w)) {
                       const Tensor &mv = tp.value(M);
                       Tensor &gw = tp.grad_slot(w);
                       for (std::size_t t = 0; t < T; ++t) {
                         auto r = mv.row(t);
                         for (std::size_t j = 0; j < d; ++j) gw[j] += gy[t] * r[j];
                       }
                     }
                   });
}

/// Scales row t of M by s_t  (M: [T,d], s: [T]).
inline Var scale_rows(Tape &tape, Var M, Var s) {
  const Tensor &mv = tape.value(M);
  const Tensor &sv = tape.value(s);
  detail::expect_rank(mv, 2, "scale_rows");
  require(sv.rank() == 1 && sv.size() == mv.rows(), "scale_rows: size mismatch");
  const std::size_t T = mv.rows(), d = mv.cols();
  Tensor y = mv;
  for (std::size_t t = 0; t < T; ++t)
    for (auto &v : y.row(t)) v *= sv[t];
  return tape.push(std::move(y), detail::any_grad(tape, {M, s}),
                   [M, s, T, d, id = tape.size()](Tape &tp) {
                     const Tensor &gy = *tp.grad(Var(id));
                     if (tp.requires_grad(M)) {
                       const Tensor &sv = tp.value(s);
                       Tensor &gm = tp.grad_slot(M);
                       for (std::size_t t = 0; t < T; ++t) {
                         auto gr = gm.row(t);
                         auto src = gy.row(t);
                         for (std::size_t j = 0; j < d; ++j) gr[j] += sv[t] * src[j];
                       }
                     }
                     if (tp.requires_grad(s)) {
                       const Tensor &mv = tp.value(M);
                       Tensor &gs = tp.grad_slot(s);
                       for (std::size_t t = 0; t < T; ++t) {
                         auto r = mv.row(t);
                         auto src = gy.row(t);
                         double acc = 0.0;
                         for (std::size_t j = 0; j < d; ++j) acc += r[j] * src[j];
                         gs[t] += acc;
                       }
                     }
                   });
}

/// Additive attention energies: e_t = v . tanh(P_t + q)
/// (P: [T,A] projected keys, q: [A] projected query incl. bias, v: [A]).
inline Var additive_energies(Tape &tape, Var P, Var q, Var v) {
  const Tensor &pv = tape.value(P);
  const Tensor &qv = tape.value(q);
  const Tensor &vv = tape.value(v);
  detail::expect_rank(pv, 2, "additive_energies");
  const std::size_t T = pv.rows(), A = pv.cols();
  require(qv.size() == A && vv.size() == A,
          "additive_energies: attention dimension mismatch");
  Tensor y({T});
  for (std::size_t t = 0; t < T; ++t) {
    auto r = pv.row(t);
    double acc = 0.0;
    for (std::size_t a = 0; a < A; ++a) acc += vv[a] * std::tanh(r[a] + qv[a]);
    y[t] = acc;
  }
  return tape.push(
      std::move(y), detail::any_grad(tape, {P, q, v}),
      [P, q, v, T, A, id = tape.size()](Tape &tp) {
        const Tensor &gy = *tp.grad(Var(id));
        const Tensor &pv = tp.value(P);
        const Tensor &qv = tp.value(q);
        const Tensor &vv = tp.value(v);
        const bool gp = tp.requires_grad(P), gq = tp.requires_grad(q),
                   gv = tp.requires_grad(v);
        Tensor *gP = gp ? &tp.grad_slot(P) : nullptr;
        Tensor *gQ = gq ? &tp.grad_slot(q) : nullptr;
        Tensor *gV = gv ? &tp.grad_slot(v) : nullptr;
        for (std::size_t t = 0; t < T; ++t) {
          const double g = gy[t];
          if (g == 0.0) continue;
          auto r = pv.row(t);
          for (std::size_t a = 0; a < A; ++a) {
            const double th = std::tanh(r[a] + qv[a]);
            if (gV) (*gV)[a] += g * th;
            const double d = g * vv[a] * (1.0 - th * th);
            if (gP) gP->at(t, a) += d;
            if (gQ) (*gQ)[a] += d;
          }
        }
      });
}

/// Softmax over a rank-1 operand. Positions with valid[t] == false get
/// exactly zero probability; at least one position must be valid.
inline Var softmax(Tape &tape, Var x, const std::vector<bool> *valid = nullptr) {
  const Tensor &xv = tape.value(x);
  detail::expect_rank(xv, 1, "softmax");
  const std::size_t n = xv.size();
  require(!valid || valid->size() == n, "softmax: validity mask length");
  double mx = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    if (valid && !(*valid)[i]) continue;
    require(std::isfinite(xv[i]), "softmax: non-finite input");
    mx = std::max(mx, xv[i]);
  }
  require(mx > -INFINITY, "softmax: every position is padded");
  Tensor y({n});
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (valid && !(*valid)[i]) continue;
    y[i] = std::exp(xv[i] - mx);
    z += y[i];
  }
  for (auto &p : y.values()) p /= z;
  return tape.push(std::move(y), detail::any_grad(tape, {x}),
                   [x, n, id = tape.size()](Tape &t) {
                     const Tensor &p = t.value(Var(id));
                     const Tensor &gy = *t.grad(Var(id));
                     double s = 0.0;
                     for (std::size_t i = 0; i < n; ++i) s += p[i] * gy[i];
                     Tensor &g = t.grad_slot(x);
                     for (std::size_t i = 0; i < n; ++i) g[i] += p[i] * (gy[i] - s);
                   });
}

/// Canonical LSTM pointwise stage. `gates` is the [4H] pre-activation in
/// order (input, forget, candidate, output); returns [h; c] of size 2H.
inline Var lstm_pointwise(Tape &tape, Var gates, Var c_prev) {
  const Tensor &gv = tape.value(gates);
  const Tensor &cv = tape.value(c_prev);
  const std::size_t H = cv.size();
  require(gv.rank() == 1 && gv.size() == 4 * H,
          "lstm: gate pre-activation size " + std::to_string(gv.size()) +
              " does not match 4 x " + std::to_string(H) + " units");
  Tensor y({2 * H});
  for (std::size_t k = 0; k < H; ++k) {
    const double i = anchor::sigmoid(gv[k]);
    const double f = anchor::sigmoid(gv[H + k]);
    const double g = std::tanh(gv[2 * H + k]);
    const double o = anchor::sigmoid(gv[3 * H + k]);
    const double c = f * cv[k] + i * g;
    y[k] = o * std::tanh(c);
    y[H + k] = c;
  }
  return tape.push(
      std::move(y), detail::any_grad(tape, {gates, c_prev}),
      [gates, c_prev, H, id = tape.size()](Tape &t) {
        const Tensor &gv = t.value(gates);
        const Tensor &cv = t.value(c_prev);
        const Tensor &y = t.value(Var(id));
        const Tensor &gy = *t.grad(Var(id));
        Tensor *gG = t.requires_grad(gates) ? &t.grad_slot(gates) : nullptr;
        Tensor *gC = t.requires_grad(c_prev) ? &t.grad_slot(c_prev) : nullptr;
        for (std::size_t k = 0; k < H; ++k) {
          const double i = anchor::sigmoid(gv[k]);
          const double f = anchor::sigmoid(gv[H + k]);
          const double g = std::tanh(gv[2 * H + k]);
          const double o = anchor::sigmoid(gv[3 * H + k]);
          const double tc = std::tanh(y[H + k]);
          const double dh = gy[k];
          const double dc = gy[H + k] + dh * o * (1.0 - tc * tc);
          if (gG) {
            (*gG)[k] += dc * g * i * (1.0 - i);
            (*gG)[H + k] += dc * cv[k] * f * (1.0 - f);
            (*gG)[2 * H + k] += dc * i * (1.0 - g * g);
            (*gG)[3 * H + k] += dh * tc * o * (1.0 - o);
          }
          if (gC) (*gC)[k] += dc * f;
        }
      });
}

/// Geometry of a strided 2-D convolution over (time, frequency) with zero
/// padding on the right/top edge. Frames are laid out channel-major:
/// feature index = channel * freq_bins + bin.
struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t in_freq = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_time = 1;
  std::size_t kernel_freq = 1;
  std::size_t stride_time = 1;
  std::size_t stride_freq = 1;

  std::size_t out_freq() const {
    return (in_freq + stride_freq - 1) / stride_freq;
  }
  std::size_t out_frames(std::size_t in_frames) const {
    return (in_frames + stride_time - 1) / stride_time;
  }
  std::size_t in_dim() const { return in_channels * in_freq; }
  std::size_t out_dim() const { return out_channels * out_freq(); }
  std::size_t kernel_size() const {
    return in_channels * kernel_time * kernel_freq;
  }
};

/// X: [L, Cin*F], W: [Cout, Cin*kt*kf], b: [Cout] -> [ceil(L/st), Cout*Fo].
inline Var conv2d(Tape &tape, Var X, Var W, Var b, const ConvGeometry &geo) {
  const Tensor &xv = tape.value(X);
  const Tensor &wv = tape.value(W);
  const Tensor &bv = tape.value(b);
  detail::expect_rank(xv, 2, "conv2d");
  require(xv.cols() == geo.in_dim(), "conv2d: input dim " +
                                         std::to_string(xv.cols()) +
                                         " != channels x bins " +
                                         std::to_string(geo.in_dim()));
  require(wv.rank() == 2 && wv.rows() == geo.out_channels &&
              wv.cols() == geo.kernel_size(),
          "conv2d: kernel shape " + shape_str(wv.shape()));
  require(bv.size() == geo.out_channels, "conv2d: bias size");
  const std::size_t L = xv.rows();
  const std::size_t T = geo.out_frames(L), Fo = geo.out_freq();
  const std::size_t Fi = geo.in_freq;
  Tensor y({T, geo.out_dim()});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t co = 0; co < geo.out_channels; ++co) {
      auto wr = wv.row(co);
      for (std::size_t fo = 0; fo < Fo; ++fo) {
        double acc = bv[co];
        for (std::size_t ci = 0; ci < geo.in_channels; ++ci)
          for (std::size_t dt = 0; dt < geo.kernel_time; ++dt) {
            const std::size_t ti = t * geo.stride_time + dt;
            if (ti >= L) break;
            for (std::size_t df = 0; df < geo.kernel_freq; ++df) {
              const std::size_t fi = fo * geo.stride_freq + df;
              if (fi >= Fi) break;
              acc += wr[(ci * geo.kernel_time + dt) * geo.kernel_freq + df] *
                     xv.at(ti, ci * Fi + fi);
            }
          }
        y.at(t, co * Fo + fo) = acc;
      }
    }
  return tape.push(
      std::move(y), detail::any_grad(tape, {X, W, b}),
      [X, W, b, geo, L, T, Fo, Fi, id = tape.size()](Tape &tp) {
        const Tensor &gy = *tp.grad(Var(id));
        const Tensor &xv = tp.value(X);
        const Tensor &wv = tp.value(W);
        Tensor *gX = tp.requires_grad(X) ? &tp.grad_slot(X) : nullptr;
        Tensor *gW = tp.requires_grad(W) ? &tp.grad_slot(W) : nullptr;
        Tensor *gB = tp.requires_grad(b) ? &tp.grad_slot(b) : nullptr;
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t co = 0; co < geo.out_channels; ++co)
            for (std::size_t fo = 0; fo < Fo; ++fo) {
              const double g = gy.at(t, co * Fo + fo);
              if (gB) (*gB)[co] += g;
              for (std::size_t ci = 0; ci < geo.in_channels; ++ci)
                for (std::size_t dt = 0; dt < geo.kernel_time; ++dt) {
                  const std::size_t ti = t * geo.stride_time + dt;
                  if (ti >= L) break;
                  for (std::size_t df = 0; df < geo.kernel_freq; ++df) {
                    const std::size_t fi = fo * geo.stride_freq + df;
                    if (fi >= Fi) break;
                    const std::size_t k =
                        (ci * geo.kernel_time + dt) * geo.kernel_freq + df;
                    if (gW) gW->at(co, k) += g * xv.at(ti, ci * Fi + fi);
                    if (gX) gX->at(ti, ci * Fi + fi) += g * wv.at(co, k);
                  }
                }
            }
      });
}

/// Columnwise maximum over the rows of a [T,d] sequence -> [d].
/// The gradient goes to the first row attaining the maximum.
inline Var max_rows(Tape &tape, Var M) {
  const Tensor &mv = tape.value(M);
  detail::expect_rank(mv, 2, "max_rows");
  const std::size_t T = mv.rows(), d = mv.cols();
  Tensor y({d});
  std::vector<std::size_t> arg(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    y[j] = mv.at(0, j);
    for (std::size_t t = 1; t < T; ++t)
      if (mv.at(t, j) > y[j]) {
        y[j] = mv.at(t, j);
        arg[j] = t;
      }
  }
  return tape.push(std::move(y), detail::any_grad(tape, {M}),
                   [M, arg = std::move(arg), id = tape.size()](Tape &t) {
                     const Tensor &gy = *t.grad(Var(id));
                     Tensor &g = t.grad_slot(M);
                     for (std::size_t j = 0; j < arg.size(); ++j)
                       g.at(arg[j], j) += gy[j];
                   });
}

/// -log softmax(logits)[target] -> (1).
inline Var cross_entropy(Tape &tape, Var logits, std::size_t target) {
  const Tensor &lv = tape.value(logits);
  detail::expect_rank(lv, 1, "cross_entropy");
  require(target < lv.size(), "cross_entropy: target out of range");
  const auto lp = log_softmax(lv.data());
  return tape.push(Tensor::scalar(-lp[target]), detail::any_grad(tape, {logits}),
                   [logits, target, id = tape.size()](Tape &t) {
                     const double g = (*t.grad(Var(id)))[0];
                     const auto p = anchor::softmax(t.value(logits).data());
                     Tensor &gl = t.grad_slot(logits);
                     for (std::size_t i = 0; i < p.size(); ++i)
                       gl[i] += g * (p[i] - (i == target ? 1.0 : 0.0));
                   });
}

inline constexpr double kProbClamp = 1e-7;

/// Class-weighted binary cross-entropy of probabilities `phi` against 0/1
/// labels, normalized by the total applied weight over valid frames.
inline Var weighted_bce(Tape &tape, Var phi, std::span<const int> gold,
                        double w1, double w0,
                        const std::vector<bool> *valid = nullptr) {
  const Tensor &pv = tape.value(phi);
  detail::expect_rank(pv, 1, "weighted_bce");
  const std::size_t T = pv.size();
  require(gold.size() == T, "mask loss: " + std::to_string(T) +
                                " predictions vs " +
                                std::to_string(gold.size()) + " labels");
  require(!valid || valid->size() == T, "mask loss: validity length");
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (valid && !(*valid)[t]) continue;
    const double w = gold[t] ? w1 : w0;
    const double p = std::clamp(pv[t], kProbClamp, 1.0 - kProbClamp);
    num += w * -(gold[t] ? std::log(p) : std::log(1.0 - p));
    den += w;
  }
  require(den > 0.0, "mask loss: no valid frames");
  std::vector<int> labels(gold.begin(), gold.end());
  std::vector<bool> mask = valid ? *valid : std::vector<bool>(T, true);
  return tape.push(
      Tensor::scalar(num / den), detail::any_grad(tape, {phi}),
      [phi, labels = std::move(labels), mask = std::move(mask), w1, w0, den,
       id = tape.size()](Tape &t) {
        const double g = (*t.grad(Var(id)))[0];
        const Tensor &pv = t.value(phi);
        Tensor &gp = t.grad_slot(phi);
        for (std::size_t k = 0; k < labels.size(); ++k) {
          if (!mask[k]) continue;
          const double p = pv[k];
          if (p < kProbClamp || p > 1.0 - kProbClamp) continue;
          const double w = labels[k] ? w1 : w0;
          const double d = labels[k] ? -1.0 / p : 1.0 / (1.0 - p);
          gp[k] += g * w * d / den;
        }
      });
}

/// Sum of scalar operands -> (1).
inline Var sum(Tape &tape, std::span<const Var> terms) {
  double acc = 0.0;
  bool need = false;
  for (Var v : terms) {
    const Tensor &tv = tape.value(v);
    require(tv.size() == 1, "sum: operands must be scalars");
    acc += tv[0];
    need = need || tape.requires_grad(v);
  }
  std::vector<Var> ins(terms.begin(), terms.end());
  return tape.push(Tensor::scalar(acc), need,
                   [ins = std::move(ins), id = tape.size()](Tape &t) {
                     const double g = (*t.grad(Var(id)))[0];
                     for (Var v : ins)
                       if (t.requires_grad(v)) t.grad_slot(v)[0] += g;
                   });
}

}  // namespace ops
}  // namespace anchor
