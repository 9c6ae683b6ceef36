// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "f3/numcore/matrix.hpp"
#include "f3/numcore/tape.hpp"

namespace f3 {

struct SinkhornDiagnostics {
  /// residual[j] = || [K_j^T 1; K_j 1] - [1; 1] ||_2 for j = 0..T (j = 0 is K0 itself).
  std::vector<double> residual;
  /// Second singular value of the final iterate.
  double sigma2 = 0.0;
};

struct SinkhornResult {
  Matrix K;
  SinkhornDiagnostics diagnostics;
};

/// Truncated Sinkhorn-Knopp from r_0 = 1:
///   c_{j+1} = 1 / (K0^T r_j),  r_{j+1} = 1 / (K0 c_{j+1}),  K_j = diag(r_j) K0 diag(c_j).
/// K0 must be square with strictly positive entries (DomainError otherwise).
/// NumericError names the iteration if a scaling vector leaves the finite range.
SinkhornResult sinkhorn(const Matrix& K0, std::size_t iterations);

/// Differentiable through all iterations; same arithmetic as sinkhorn().
Var sinkhorn(Var K0, std::size_t iterations);

double sinkhorn_residual(const Matrix& K);

/// Singular values in descending order.
std::vector<double> singular_values(const Matrix& m);

struct DecayFit {
  bool sufficient = false;  // fewer than 10 usable points leaves the fit empty
  double slope = 0.0;       // least-squares slope of log residual per iteration
  double intercept = 0.0;
  std::size_t points = 0;
  double predicted = 0.0;   // 2 log sigma2
};

/// Fits log residual against iteration over j >= burn_in with residual > floor.
DecayFit fit_decay_rate(const SinkhornDiagnostics& diag, std::size_t burn_in = 2,
                        double floor = 1e-13);

/// Geometric-mean ratio residual[j+1] / residual[j] over j >= burn_in.
double mean_decay_ratio(const SinkhornDiagnostics& diag, std::size_t burn_in = 1);

/// "iteration,residual" CSV.
std::string diagnostics_csv(const SinkhornDiagnostics& diag);

}  // namespace f3
