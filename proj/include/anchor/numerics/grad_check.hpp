// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   grad_check.hpp
 * @brief  Central finite-difference verification of analytic gradients.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "anchor/numerics/tape.hpp"

namespace anchor {

/// Evaluates a scalar loss at `params`. When `grads` is non-null it must
/// also add the analytic gradient into it (slots are pre-zeroed).
using LossFn = std::function<double(const ParameterSet &params,
                                    ParameterSet *grads)>;

struct ParamCheck {
  std::string name;
  std::size_t scalars = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;

  bool passed() const { return max_rel_error < tolerance; }
};

inline double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares the analytic gradient of every scalar in `params` against a
/// central difference with step `epsilon`.
inline GradCheckReport grad_check(const LossFn &loss_fn, ParameterSet params,
                                  double epsilon, double tolerance) {
  require(epsilon > 0.0 && epsilon <= 1e-3,
          "grad_check: epsilon must lie in (0, 1e-3]");
  const double base = loss_fn(params, nullptr);
  const double again = loss_fn(params, nullptr);
  require(base == again,
          "grad_check: loss function is not deterministic");
  ParameterSet analytic = zeros_like(params);
  loss_fn(params, &analytic);

  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto &[name, tensor] : params) {
    ParamCheck pc;
    pc.name = name;
    pc.scalars = tensor.size();
    const Tensor &ga = analytic.at(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double orig = tensor[i];
      tensor[i] = orig + epsilon;
      const double up = loss_fn(params, nullptr);
      tensor[i] = orig - epsilon;
      const double down = loss_fn(params, nullptr);
      tensor[i] = orig;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double err = relative_error(ga[i], numeric);
      if (i == 0 || err > pc.max_rel_error) {
        pc.max_rel_error = err;
        pc.worst_index = i;
        pc.worst_analytic = ga[i];
        pc.worst_numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
    report.params.push_back(std::move(pc));
  }
  return report;
}

}  // namespace anchor
