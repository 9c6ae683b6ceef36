// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "f3/numcore/matrix.hpp"
#include "f3/numcore/tape.hpp"

namespace f3 {

/// Builds a scalar (1x1) from parameter leaves already placed on `tape`.
/// Must be deterministic: any randomness has to be fixed by the caller.
using ScalarFn = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckOptions {
  double step = 1e-6;
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-4;
};

struct GradCheckReport {
  std::vector<double> max_rel_error;  // one entry per parameter
  std::vector<Matrix> analytic;
  std::vector<Matrix> numeric;
  double tol = 0.0;
  bool passed = false;

  double worst() const;
};

/// Compares tape gradients with central differences for every entry of every
/// parameter. Throws ContractError if two forward passes at the same point differ.
GradCheckReport grad_check(const ScalarFn& f, std::span<const Matrix> params, double tol,
                           const GradCheckOptions& options = {});

/// Evaluates `f` on a fresh tape; returns (value, gradients).
std::pair<double, std::vector<Matrix>> value_and_grad(const ScalarFn& f,
                                                      std::span<const Matrix> params);

}  // namespace f3
