// SPDX-License-Identifier: Apache-2.0
#include "f3/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "f3/numcore/errors.hpp"

namespace f3 {

namespace {

double evaluate(const ScalarFn& f, std::span<const Matrix> params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Matrix& p : params) leaves.push_back(tape.constant(p));
  const Var out = f(tape, leaves);
  if (out.value().size() != 1) {
    throw ShapeError("grad_check: function must return 1x1, got " + out.value().shape_str());
  }
  return out.value()[0];
}

}  // namespace

double GradCheckReport::worst() const {
  double w = 0.0;
  for (double e : max_rel_error) w = std::max(w, e);
  return w;
}

std::pair<double, std::vector<Matrix>> value_and_grad(const ScalarFn& f,
                                                      std::span<const Matrix> params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Matrix& p : params) leaves.push_back(tape.parameter(p));
  const Var out = f(tape, leaves);
  if (out.value().size() != 1) {
    throw ShapeError("value_and_grad: function must return 1x1, got " + out.value().shape_str());
  }
  tape.backward(out);
  std::vector<Matrix> grads;
  grads.reserve(leaves.size());
  for (Var v : leaves) grads.push_back(tape.grad(v));
  return {out.value()[0], std::move(grads)};
}

GradCheckReport grad_check(const ScalarFn& f, std::span<const Matrix> params, double tol,
                           const GradCheckOptions& options) {
  const double first = evaluate(f, params);
  const double second = evaluate(f, params);
  if (first != second && !(std::isnan(first) && std::isnan(second))) {
    throw ContractError("grad_check: function is not deterministic (" + std::to_string(first) +
                        " vs " + std::to_string(second) + ")");
  }

  GradCheckReport report;
  report.tol = tol;
  report.analytic = value_and_grad(f, params).second;

  std::vector<Matrix> work(params.begin(), params.end());
  for (std::size_t p = 0; p < work.size(); ++p) {
    Matrix numeric(work[p].rows(), work[p].cols());
    double worst = 0.0;
    for (std::size_t i = 0; i < work[p].size(); ++i) {
      const double orig = work[p][i];
      work[p][i] = orig + options.step;
      const double up = evaluate(f, work);
      work[p][i] = orig - options.step;
      const double down = evaluate(f, work);
      work[p][i] = orig;
      numeric[i] = (up - down) / (2.0 * options.step);
      const double a = report.analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric[i]), options.floor});
      worst = std::max(worst, std::abs(a - numeric[i]) / denom);
    }
    report.max_rel_error.push_back(worst);
    report.numeric.push_back(std::move(numeric));
  }
  report.passed = report.worst() <= tol;
  return report;
}

}  // namespace f3
