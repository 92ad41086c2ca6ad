// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   test_util.hpp
 * @brief  Shared helpers for the unit suites.
 */
#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "anchor/numerics/grad_check.hpp"
#include "anchor/numerics/ops.hpp"
#include "anchor/numerics/rng.hpp"

namespace anchor::testing {

inline Tensor random_tensor(Rng &rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto &v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

using OpBuilder = std::function<Var(Tape &, const std::vector<Var> &)>;

/// Finite-difference check of one op: the inputs become trainable leaves
/// named x0, x1, ... and the loss is a fixed random projection of the
/// output, sum_i r_i y_i.
inline GradCheckReport check_op(const OpBuilder &op, const std::vector<Tensor> &inputs,
                                std::uint64_t seed, double eps = 1e-6, double tol = 1e-5) {
  ParameterSet params;
  for (std::size_t i = 0; i < inputs.size(); ++i) params["x" + std::to_string(i)] = inputs[i];
  Tensor proj;
  {
    Tape probe(false);
    std::vector<Var> xs;
    for (std::size_t i = 0; i < inputs.size(); ++i) xs.push_back(probe.reference(inputs[i]));
    Rng rng(seed);
    proj = random_tensor(rng, probe.value(op(probe, xs)).shape());
  }
  const LossFn fn = [&](const ParameterSet &p, ParameterSet *grads) {
    Tape tape(grads != nullptr);
    std::vector<Var> xs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const std::string name = "x" + std::to_string(i);
      xs.push_back(tape.parameter(name, p.at(name)));
    }
    const Var y = op(tape, xs);
    const Tensor &yv = tape.value(y);
    double loss = 0.0;
    for (std::size_t i = 0; i < yv.size(); ++i) loss += proj[i] * yv[i];
    if (grads) {
      const Var l = tape.push(Tensor::scalar(loss), tape.requires_grad(y),
                              [y, &proj, id = tape.size()](Tape &t) {
                                const double g = (*t.grad(Var(id)))[0];
                                Tensor &gy = t.grad_slot(y);
                                for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += g * proj[i];
                              });
      tape.backward(l);
      tape.accumulate_parameter_grads(*grads);
    }
    return loss;
  };
  return grad_check(fn, params, eps, tol);
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("anchor_asr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace anchor::testing
