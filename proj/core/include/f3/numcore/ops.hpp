// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>

#include "f3/numcore/matrix.hpp"

namespace f3 {

enum class UnaryOp { relu, sigmoid, tanh, exp, log };

std::string_view to_string(UnaryOp op);

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// Plain (untracked) kernels. The tape in tape.hpp records the same kernels
// together with their adjoints.

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

/// Entrywise application of `op`. For log, every entry must be > 0;
/// otherwise DomainError carries the first offending flat index.
Matrix elementwise(UnaryOp op, const Matrix& m);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& m);

/// Probabilities below this are clamped before taking the log.
inline constexpr double kLogClamp = 1e-12;

/// Mean over rows of -log pred[k, labels[k]] (clamped at kLogClamp).
double cross_entropy(const Matrix& pred, std::span<const int> labels);

double sum(const Matrix& m);
Matrix row_sums(const Matrix& m);  // r x 1
Matrix col_sums(const Matrix& m);  // 1 x c

/// Index of the largest entry in each row; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Matrix& m);

}  // namespace f3
