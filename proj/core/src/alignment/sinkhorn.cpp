// SPDX-License-Identifier: Apache-2.0
#include "f3/alignment/sinkhorn.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/SVD>

#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/ops.hpp"

namespace f3 {

namespace {

void require_kernel(const Matrix& K0) {
  if (K0.rows() != K0.cols() || K0.empty()) {
    throw ShapeError("sinkhorn: kernel must be square and nonempty, got " + K0.shape_str());
  }
  for (std::size_t i = 0; i < K0.size(); ++i) {
    if (!(K0[i] > 0.0)) throw DomainError("sinkhorn: kernel entries must be > 0", i);
  }
}

void require_finite(const Matrix& v, std::size_t iteration, const char* name) {
  if (!all_finite(v)) {
    throw NumericError("sinkhorn: scaling vector " + std::string(name) +
                       " overflowed at iteration " + std::to_string(iteration));
  }
  for (double x : v.values()) {
    if (x == 0.0) {
      throw NumericError("sinkhorn: scaling vector " + std::string(name) +
                         " underflowed at iteration " + std::to_string(iteration));
    }
  }
}

Matrix reciprocal(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = 1.0 / m[i];
  return out;
}

Matrix scaled(const Matrix& K0, const Matrix& r, const Matrix& c) {
  Matrix K = K0;
  for (std::size_t i = 0; i < K.rows(); ++i)
    for (std::size_t j = 0; j < K.cols(); ++j) K(i, j) = K(i, j) * c[j] * r[i];
  return K;
}

}  // namespace

double sinkhorn_residual(const Matrix& K) {
  const Matrix rs = row_sums(K);
  const Matrix cs = col_sums(K);
  double acc = 0.0;
  for (double v : rs.values()) acc += (v - 1.0) * (v - 1.0);
  for (double v : cs.values()) acc += (v - 1.0) * (v - 1.0);
  return std::sqrt(acc);
}

SinkhornResult sinkhorn(const Matrix& K0, std::size_t iterations) {
  require_kernel(K0);
  const Matrix K0t = transpose(K0);
  Matrix r(K0.rows(), 1, 1.0);
  Matrix c(K0.cols(), 1, 1.0);
  SinkhornResult res;
  res.diagnostics.residual.push_back(sinkhorn_residual(K0));
  for (std::size_t j = 1; j <= iterations; ++j) {
    c = reciprocal(matmul(K0t, r));
    require_finite(c, j, "c");
    r = reciprocal(matmul(K0, c));
    require_finite(r, j, "r");
    res.diagnostics.residual.push_back(sinkhorn_residual(scaled(K0, r, c)));
  }
  res.K = scaled(K0, r, c);
  const auto sv = singular_values(res.K);
  res.diagnostics.sigma2 = sv.size() > 1 ? sv[1] : 0.0;
  return res;
}

Var sinkhorn(Var K0, std::size_t iterations) {
  require_kernel(K0.value());
  Tape& t = *K0.tape();
  const Var K0t = transpose(K0);
  Var r = t.constant(Matrix(K0.rows(), 1, 1.0));
  Var c = t.constant(Matrix(K0.cols(), 1, 1.0));
  for (std::size_t j = 1; j <= iterations; ++j) {
    c = reciprocal(matmul(K0t, r));
    require_finite(c.value(), j, "c");
    r = reciprocal(matmul(K0, c));
    require_finite(r.value(), j, "r");
  }
  return scale_rows(scale_cols(K0, transpose(c)), r);
}

std::vector<double> singular_values(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  const auto& s = svd.singularValues();
  return {s.data(), s.data() + s.size()};
}

DecayFit fit_decay_rate(const SinkhornDiagnostics& diag, std::size_t burn_in, double floor) {
  DecayFit fit;
  fit.predicted = diag.sigma2 > 0.0 ? 2.0 * std::log(diag.sigma2)
                                    : -std::numeric_limits<double>::infinity();
  std::vector<double> xs, ys;
  for (std::size_t j = burn_in; j < diag.residual.size(); ++j) {
    if (diag.residual[j] <= floor) break;
    xs.push_back(static_cast<double>(j));
    ys.push_back(std::log(diag.residual[j]));
  }
  fit.points = xs.size();
  if (xs.size() < 10) return fit;

  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.sufficient = true;
  return fit;
}

double mean_decay_ratio(const SinkhornDiagnostics& diag, std::size_t burn_in) {
  const auto& r = diag.residual;
  if (r.size() < burn_in + 2) throw ContractError("mean_decay_ratio: trajectory too short");
  const double steps = static_cast<double>(r.size() - 1 - burn_in);
  return std::exp((std::log(r.back()) - std::log(r[burn_in])) / steps);
}

std::string diagnostics_csv(const SinkhornDiagnostics& diag) {
  std::string out = "iteration,residual\n";
  char buf[64];
  for (std::size_t j = 0; j < diag.residual.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", j, diag.residual[j]);
    out += buf;
  }
  return out;
}

}  // namespace f3
