// SPDX-License-Identifier: Apache-2.0
#include "f3/numcore/adam.hpp"

#include <cmath>

#include "f3/numcore/errors.hpp"

namespace f3 {

void Adam::step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("Adam::step: " + std::to_string(params.size()) + " params, " +
                     std::to_string(grads.size()) + " grads");
  }
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  }
  if (m_.size() != params.size()) throw ContractError("Adam::step: parameter list changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = grads[k];
    if (!p.same_shape(g) || !p.same_shape(m_[k])) {
      throw ShapeError("Adam::step: parameter " + std::to_string(k) + " is " + p.shape_str() +
                       ", gradient " + g.shape_str());
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m_[k][i] = config_.beta1 * m_[k][i] + (1.0 - config_.beta1) * g[i];
      v_[k][i] = config_.beta2 * v_[k][i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = m_[k][i] / bc1;
      const double vhat = v_[k][i] / bc2;
      p[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace f3
