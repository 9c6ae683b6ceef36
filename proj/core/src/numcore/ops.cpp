// SPDX-License-Identifier: Apache-2.0
#include "f3/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "f3/numcore/errors.hpp"

namespace f3 {

std::string_view to_string(UnaryOp op) {
  switch (op) {
    case UnaryOp::relu: return "relu";
    case UnaryOp::sigmoid: return "sigmoid";
    case UnaryOp::tanh: return "tanh";
    case UnaryOp::exp: return "exp";
    case UnaryOp::log: return "log";
  }
  return "?";
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + a.shape_str() + " * " + b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = a.cols();
  const std::size_t p = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* orow = out.row_span(i).data();
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row_span(k).data();
      for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

namespace {

void require_same(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": " + a.shape_str() + " vs " + b.shape_str());
  }
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
  require_same("add", a, b);
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same("sub", a, b);
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same("hadamard", a, b);
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

Matrix elementwise(UnaryOp op, const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double x = m[i];
    switch (op) {
      case UnaryOp::relu: out[i] = x > 0.0 ? x : 0.0; break;
      case UnaryOp::sigmoid: out[i] = sigmoid(x); break;
      case UnaryOp::tanh: out[i] = std::tanh(x); break;
      case UnaryOp::exp: out[i] = std::exp(x); break;
      case UnaryOp::log:
        if (!(x > 0.0)) throw DomainError("log: entry must be > 0", i);
        out[i] = std::log(x);
        break;
    }
  }
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  if (m.empty()) throw ShapeError("softmax_rows: empty matrix");
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row_span(r);
    auto o = out.row_span(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (double& v : o) v /= z;
  }
  return out;
}

double cross_entropy(const Matrix& pred, std::span<const int> labels) {
  if (labels.size() != pred.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     pred.shape_str() + " predictions");
  }
  if (pred.rows() == 0) throw ShapeError("cross_entropy: no rows");
  double total = 0.0;
  for (std::size_t k = 0; k < pred.rows(); ++k) {
    const int y = labels[k];
    if (y < 0 || static_cast<std::size_t>(y) >= pred.cols()) {
      throw IndexError("cross_entropy: label " + std::to_string(y) + " out of range for " +
                       std::to_string(pred.cols()) + " classes (row " + std::to_string(k) + ")");
    }
    total -= std::log(std::max(pred(k, static_cast<std::size_t>(y)), kLogClamp));
  }
  return total / static_cast<double>(pred.rows());
}

double sum(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v;
  return s;
}

Matrix row_sums(const Matrix& m) {
  Matrix out(m.rows(), 1);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row_span(r)) s += v;
    out[r] = s;
  }
  return out;
}

Matrix col_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row_span(r);
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c];
  }
  return out;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row_span(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace f3
