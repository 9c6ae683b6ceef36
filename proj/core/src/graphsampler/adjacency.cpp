// SPDX-License-Identifier: Apache-2.0
#include "f3/graphsampler/adjacency.hpp"

#include <cmath>

#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/ops.hpp"

namespace f3 {

namespace {

void require_square(const Matrix& a) {
  if (a.rows() != a.cols() || a.empty()) {
    throw ShapeError("normalize_adjacency: expected a nonempty square matrix, got " + a.shape_str());
  }
}

}  // namespace

// Both versions evaluate (A+I)_rc * s_c * s_r in the same order, so they agree bitwise.
Matrix normalize_adjacency(const Matrix& a) {
  require_square(a);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] >= 0.0 && a[i] <= 1.0)) throw DomainError("normalize_adjacency: entry outside [0, 1]", i);
  }
  const Matrix a1 = add(a, Matrix::identity(a.rows()));
  const Matrix deg = row_sums(a1);
  Matrix out = a1;
  const std::size_t n = a.rows();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = std::pow(deg[i], -0.5);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) out(r, c) = out(r, c) * s[c] * s[r];
  return out;
}

Var normalize_adjacency(Var a) {
  require_square(a.value());
  Tape& t = *a.tape();
  const Var a1 = add(a, t.constant(Matrix::identity(a.rows())));
  const Var s = power(row_sums(a1), -0.5);
  return scale_rows(scale_cols(a1, transpose(s)), s);
}

}  // namespace f3
