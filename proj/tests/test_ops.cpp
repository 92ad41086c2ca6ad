// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   test_ops.cpp
 * @brief  Tape primitives: worked values and randomized finite-difference
 *         checks (100+ draws per primitive).
 */
#include <cmath>
#include <limits>

#include "test_util.hpp"

using namespace anchor;
using anchor::testing::check_op;
using anchor::testing::random_tensor;
using Vars = std::vector<Var>;

namespace {

constexpr int kCases = 100;

std::size_t dim(Rng &rng, int hi = 5) { return static_cast<std::size_t>(rng.uniform_int(1, hi)); }

/// Runs `make` for kCases seeds; `make` fills the inputs and returns the op.
template <class Make>
void property(const char *name, Make make) {
  int failures = 0;
  for (int k = 0; k < kCases; ++k) {
    Rng rng(mix_seed(0xA11CE, static_cast<std::uint64_t>(k)));
    std::vector<Tensor> inputs;
    anchor::testing::OpBuilder op = make(rng, inputs);
    const auto r = check_op(op, inputs, static_cast<std::uint64_t>(k));
    if (!r.passed()) {
      ++failures;
      ADD_FAILURE() << name << " case " << k << " max_rel_error " << r.max_rel_error;
    }
  }
  EXPECT_EQ(failures, 0) << name;
}

}  // namespace

// ---------------------------------------------------------------------------
// Worked values

TEST(Softmax, UniformEnergies) {
  const auto p = softmax(std::vector<double>{0, 0, 0});
  for (double x : p) EXPECT_NEAR(x, 1.0 / 3.0, 1e-12);
}

TEST(Softmax, OneTwoThree) {
  const auto p = softmax(std::vector<double>{1, 2, 3});
  EXPECT_NEAR(p[0], 0.0900, 1e-4);
  EXPECT_NEAR(p[1], 0.2447, 1e-4);
  EXPECT_NEAR(p[2], 0.6652, 1e-4);
}

TEST(Softmax, ShiftInvariant) {
  Rng rng(9);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> e(dim(rng, 8));
    for (auto &x : e) x = rng.uniform(-5, 5);
    const double c = rng.uniform(-50, 50);
    std::vector<double> s = e;
    for (auto &x : s) x += c;
    const auto a = softmax(e), b = softmax(s);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Softmax, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(softmax(std::vector<double>{}), Error);
  EXPECT_THROW(softmax(std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN()}), Error);
  EXPECT_THROW(softmax(std::vector<double>{std::numeric_limits<double>::infinity(), 0.0}), Error);
}

TEST(Softmax, MaskedPositionsGetZero) {
  Tensor x = Tensor::vector({1.0, 5.0, 2.0});
  std::vector<bool> valid{true, false, true};
  Tape tape(false);
  const Tensor &p = tape.value(ops::softmax(tape, tape.reference(x), &valid));
  EXPECT_EQ(p[1], 0.0);
  EXPECT_NEAR(p[0] + p[2], 1.0, 1e-12);
  std::vector<bool> none{false, false, false};
  EXPECT_THROW(ops::softmax(tape, tape.reference(x), &none), Error);
}

TEST(CrossEntropy, MatchesLogSoftmax) {
  Tensor l = Tensor::vector({0.5, -1.0, 2.0});
  Tape tape(false);
  const double ce = tape.value(ops::cross_entropy(tape, tape.reference(l), 2))[0];
  EXPECT_NEAR(ce, -log_softmax(l.data())[2], 1e-12);
}

TEST(WeightedBce, HandValue) {
  // phi = (0.8, 0.3), gold = (1, 0), w1 = 0.6, w0 = 1.0
  Tensor phi = Tensor::vector({0.8, 0.3});
  std::vector<int> gold{1, 0};
  Tape tape(false);
  const double l = tape.value(ops::weighted_bce(tape, tape.reference(phi), gold, 0.6, 1.0))[0];
  EXPECT_NEAR(l, (0.6 * -std::log(0.8) + 1.0 * -std::log(0.7)) / 1.6, 1e-12);
}

TEST(Affine, ShapeMismatchThrows) {
  Tensor W({2, 3}), x({4});
  Tape tape(false);
  EXPECT_THROW(ops::affine(tape, tape.reference(W), tape.reference(x)), Error);
}

// ---------------------------------------------------------------------------
// Randomized finite-difference properties

TEST(OpsGrad, Affine) {
  property("affine", [](Rng &rng, std::vector<Tensor> &in) {
    const auto m = dim(rng), n = dim(rng);
    in = {random_tensor(rng, {m, n}), random_tensor(rng, {n}), random_tensor(rng, {m})};
    return [](Tape &t, const Vars &v) { return ops::affine(t, v[0], v[1], v[2]); };
  });
}

TEST(OpsGrad, MatmulNT) {
  property("matmul_nt", [](Rng &rng, std::vector<Tensor> &in) {
    const auto T = dim(rng), n = dim(rng), m = dim(rng);
    in = {random_tensor(rng, {T, n}), random_tensor(rng, {m, n})};
    return [](Tape &t, const Vars &v) { return ops::matmul_nt(t, v[0], v[1]); };
  });
}

TEST(OpsGrad, WeightedRowSum) {
  property("weighted_row_sum", [](Rng &rng, std::vector<Tensor> &in) {
    const auto T = dim(rng), d = dim(rng);
    in = {random_tensor(rng, {T, d}), random_tensor(rng, {T})};
    return [](Tape &t, const Vars &v) { return ops::weighted_row_sum(t, v[0], v[1]); };
  });
}

TEST(OpsGrad, AddMulScale) {
  property("add_mul_scale", [](Rng &rng, std::vector<Tensor> &in) {
    const auto n = dim(rng);
    in = {random_tensor(rng, {n}), random_tensor(rng, {n}), random_tensor(rng, {1})};
    const double k = rng.uniform(-2, 2);
    return [k](Tape &t, const Vars &v) {
      Var a = ops::add(t, ops::mul(t, v[0], v[1]), ops::scale(t, v[0], k));
      return ops::scalar_mul(t, v[2], a);
    };
  });
}

TEST(OpsGrad, Activations) {
  for (Activation act : {Activation::kLinear, Activation::kTanh, Activation::kRelu, Activation::kSigmoid}) {
    property(to_string(act).c_str(), [act](Rng &rng, std::vector<Tensor> &in) {
      in = {random_tensor(rng, {dim(rng, 8)}, -3, 3)};
      return [act](Tape &t, const Vars &v) { return ops::activate(t, v[0], act); };
    });
  }
}

TEST(OpsGrad, ConcatSlice) {
  property("concat_slice", [](Rng &rng, std::vector<Tensor> &in) {
    const auto a = dim(rng), b = dim(rng);
    in = {random_tensor(rng, {a}), random_tensor(rng, {b})};
    const auto off = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(a + b - 1)));
    const auto len = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(a + b - off)));
    return [off, len](Tape &t, const Vars &v) {
      Var c = ops::concat(t, {v[0], v[1]});
      return ops::slice(t, ops::tanh(t, c), off, len);
    };
  });
}

TEST(OpsGrad, StackRowsAndRow) {
  property("stack_row", [](Rng &rng, std::vector<Tensor> &in) {
    const auto d = dim(rng), T = dim(rng, 4);
    for (std::size_t i = 0; i < T; ++i) in.push_back(random_tensor(rng, {d}));
    const auto r = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(T - 1)));
    return [r](Tape &t, const Vars &v) {
      Var M = ops::stack_rows(t, v);
      Var picked = ops::row(t, M, r);
      auto rows = ops::unstack_rows(t, M);
      rows[0] = ops::mul(t, rows[0], picked);
      return ops::stack_rows(t, rows);
    };
  });
}

TEST(OpsGrad, DotAndRowsDot) {
  property("dot_rows_dot", [](Rng &rng, std::vector<Tensor> &in) {
    const auto T = dim(rng), d = dim(rng);
    in = {random_tensor(rng, {T, d}), random_tensor(rng, {d})};
    return [](Tape &t, const Vars &v) {
      Var r = ops::rows_dot(t, v[0], v[1]);
      return ops::scalar_mul(t, ops::dot(t, v[1], v[1]), r);
    };
  });
}

TEST(OpsGrad, ScaleRows) {
  property("scale_rows", [](Rng &rng, std::vector<Tensor> &in) {
    const auto T = dim(rng), d = dim(rng);
    in = {random_tensor(rng, {T, d}), random_tensor(rng, {T})};
    return [](Tape &t, const Vars &v) { return ops::scale_rows(t, v[0], v[1]); };
  });
}

TEST(OpsGrad, AdditiveEnergies) {
  property("additive_energies", [](Rng &rng, std::vector<Tensor> &in) {
    const auto T = dim(rng), A = dim(rng);
    in = {random_tensor(rng, {T, A}), random_tensor(rng, {A}), random_tensor(rng, {A})};
    return [](Tape &t, const Vars &v) { return ops::additive_energies(t, v[0], v[1], v[2]); };
  });
}

TEST(OpsGrad, Softmax) {
  property("softmax", [](Rng &rng, std::vector<Tensor> &in) {
    const auto n = dim(rng, 7);
    in = {random_tensor(rng, {n}, -3, 3)};
    auto valid = std::make_shared<std::vector<bool>>(n, true);
    for (std::size_t i = 1; i < n; ++i) (*valid)[i] = rng.uniform() < 0.7;
    const bool use_mask = rng.uniform() < 0.5;
    return [valid, use_mask](Tape &t, const Vars &v) {
      return ops::softmax(t, v[0], use_mask ? valid.get() : nullptr);
    };
  });
}

TEST(OpsGrad, LstmPointwise) {
  property("lstm_pointwise", [](Rng &rng, std::vector<Tensor> &in) {
    const auto H = dim(rng, 4);
    in = {random_tensor(rng, {4 * H}, -2, 2), random_tensor(rng, {H})};
    return [](Tape &t, const Vars &v) { return ops::lstm_pointwise(t, v[0], v[1]); };
  });
}

TEST(OpsGrad, Conv2d) {
  property("conv2d", [](Rng &rng, std::vector<Tensor> &in) {
    ops::ConvGeometry g;
    g.in_channels = dim(rng, 2);
    g.in_freq = dim(rng, 5);
    g.out_channels = dim(rng, 3);
    g.kernel_time = dim(rng, 3);
    g.kernel_freq = dim(rng, 3);
    g.stride_time = dim(rng, 2);
    g.stride_freq = dim(rng, 2);
    const auto L = dim(rng, 6);
    in = {random_tensor(rng, {L, g.in_dim()}), random_tensor(rng, {g.out_channels, g.kernel_size()}),
          random_tensor(rng, {g.out_channels})};
    return [g](Tape &t, const Vars &v) { return ops::conv2d(t, v[0], v[1], v[2], g); };
  });
}

TEST(OpsGrad, MaxRows) {
  property("max_rows", [](Rng &rng, std::vector<Tensor> &in) {
    in = {random_tensor(rng, {dim(rng), dim(rng)})};
    return [](Tape &t, const Vars &v) { return ops::max_rows(t, v[0]); };
  });
}

TEST(OpsGrad, CrossEntropy) {
  property("cross_entropy", [](Rng &rng, std::vector<Tensor> &in) {
    const auto V = dim(rng, 6);
    in = {random_tensor(rng, {V}, -3, 3)};
    const auto y = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(V - 1)));
    return [y](Tape &t, const Vars &v) { return ops::cross_entropy(t, v[0], y); };
  });
}

TEST(OpsGrad, WeightedBce) {
  property("weighted_bce", [](Rng &rng, std::vector<Tensor> &in) {
    const auto T = dim(rng, 8);
    in = {random_tensor(rng, {T}, -3, 3)};
    auto gold = std::make_shared<std::vector<int>>(T);
    for (auto &g : *gold) g = static_cast<int>(rng.uniform_int(0, 1));
    const double w1 = rng.uniform(0.1, 2.0), w0 = rng.uniform(0.1, 2.0);
    return [gold, w1, w0](Tape &t, const Vars &v) {
      return ops::weighted_bce(t, ops::sigmoid(t, v[0]), *gold, w1, w0);
    };
  });
}

TEST(OpsGrad, Sum) {
  property("sum", [](Rng &rng, std::vector<Tensor> &in) {
    const auto n = dim(rng);
    for (std::size_t i = 0; i < n; ++i) in.push_back(random_tensor(rng, {1}));
    return [](Tape &t, const Vars &v) {
      Vars sq;
      for (Var x : v) sq.push_back(ops::mul(t, x, x));
      return ops::sum(t, sq);
    };
  });
}
