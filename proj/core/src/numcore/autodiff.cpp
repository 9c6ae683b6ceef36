// SPDX-License-Identifier: Apache-2.0
#include "f3/numcore/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "f3/numcore/errors.hpp"

namespace f3 {

namespace {

Tape& tape_of(Var v) {
  if (!v.valid()) throw ContractError("autodiff: unattached variable");
  return *v.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw ContractError("autodiff: operands live on different tapes");
  return t;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(matmul(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, matmul(g, transpose(b.value())));
    if (tp.requires_grad(b)) tp.accumulate(b, matmul(transpose(a.value()), g));
  });
}

Var transpose(Var a) {
  return tape_of(a).record(transpose(a.value()), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, transpose(g));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(add(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(sub(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(b)) tp.accumulate(b, scale(g, -1.0));
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(hadamard(a.value(), b.value()), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, hadamard(g, b.value()));
    if (tp.requires_grad(b)) tp.accumulate(b, hadamard(g, a.value()));
  });
}

Var scale(Var a, double s) {
  return tape_of(a).record(scale(a.value(), s), {a}, [a, s](Tape& tp, const Matrix& g) {
    tp.accumulate(a, scale(g, s));
  });
}

Var add_scalar(Var a, double s) {
  Matrix out = a.value();
  for (double& v : out.values()) v += s;
  return tape_of(a).record(std::move(out), {a},
                           [a](Tape& tp, const Matrix& g) { tp.accumulate(a, g); });
}

Var add_row_broadcast(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row_broadcast: " + av.shape_str() + " + " + rv.shape_str());
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += rv[c];
  return t.record(std::move(out), {a, row}, [a, row](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(row)) tp.accumulate(row, col_sums(g));
  });
}

Var add_col_broadcast(Var a, Var col) {
  Tape& t = tape_of(a, col);
  const Matrix& av = a.value();
  const Matrix& cv = col.value();
  if (cv.cols() != 1 || cv.rows() != av.rows()) {
    throw ShapeError("add_col_broadcast: " + av.shape_str() + " + " + cv.shape_str());
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += cv[r];
  return t.record(std::move(out), {a, col}, [a, col](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(col)) tp.accumulate(col, row_sums(g));
  });
}

Var elementwise(UnaryOp op, Var m) {
  Matrix out = elementwise(op, m.value());
  return tape_of(m).record(std::move(out), {m}, [m, op](Tape& tp, const Matrix& g) {
    const Matrix& x = m.value();
    Matrix d(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
      switch (op) {
        case UnaryOp::relu: d[i] = x[i] > 0.0 ? g[i] : 0.0; break;
        case UnaryOp::sigmoid: {
          const double y = sigmoid(x[i]);
          d[i] = g[i] * y * (1.0 - y);
          break;
        }
        case UnaryOp::tanh: {
          const double y = std::tanh(x[i]);
          d[i] = g[i] * (1.0 - y * y);
          break;
        }
        case UnaryOp::exp: d[i] = g[i] * std::exp(x[i]); break;
        case UnaryOp::log: d[i] = g[i] / x[i]; break;
      }
    }
    tp.accumulate(m, d);
  });
}

Var reciprocal(Var m) {
  const Matrix& x = m.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) throw DomainError("reciprocal: zero entry", i);
    out[i] = 1.0 / x[i];
  }
  return tape_of(m).record(out, {m}, [m, out](Tape& tp, const Matrix& g) {
    Matrix d(out.rows(), out.cols());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = -g[i] * out[i] * out[i];
    tp.accumulate(m, d);
  });
}

Var power(Var m, double p) {
  const Matrix& x = m.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0)) throw DomainError("power: entry must be > 0", i);
    out[i] = std::pow(x[i], p);
  }
  return tape_of(m).record(std::move(out), {m}, [m, p](Tape& tp, const Matrix& g) {
    const Matrix& xv = m.value();
    Matrix d(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = g[i] * p * std::pow(xv[i], p - 1.0);
    tp.accumulate(m, d);
  });
}

Var softmax_rows(Var m) {
  Matrix out = softmax_rows(m.value());
  return tape_of(m).record(out, {m}, [m, out](Tape& tp, const Matrix& g) {
    Matrix d(out.rows(), out.cols());
    for (std::size_t r = 0; r < out.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < out.cols(); ++c) dot += g(r, c) * out(r, c);
      for (std::size_t c = 0; c < out.cols(); ++c) d(r, c) = out(r, c) * (g(r, c) - dot);
    }
    tp.accumulate(m, d);
  });
}

Var cross_entropy(Var pred, std::span<const int> labels) {
  const double loss = cross_entropy(pred.value(), labels);
  std::vector<int> y(labels.begin(), labels.end());
  return tape_of(pred).record(Matrix(1, 1, loss), {pred},
                              [pred, y = std::move(y)](Tape& tp, const Matrix& g) {
                                const Matrix& p = pred.value();
                                Matrix d(p.rows(), p.cols());
                                const double inv_m = g[0] / static_cast<double>(p.rows());
                                for (std::size_t k = 0; k < p.rows(); ++k) {
                                  const auto c = static_cast<std::size_t>(y[k]);
                                  if (p(k, c) > kLogClamp) d(k, c) = -inv_m / p(k, c);
                                }
                                tp.accumulate(pred, d);
                              });
}

Var sum(Var m) {
  return tape_of(m).record(Matrix(1, 1, sum(m.value())), {m}, [m](Tape& tp, const Matrix& g) {
    tp.accumulate(m, Matrix(m.rows(), m.cols(), g[0]));
  });
}

Var mean_rows(Var m) {
  const Matrix& x = m.value();
  if (x.rows() == 0) throw ShapeError("mean_rows: no rows");
  Matrix out = scale(col_sums(x), 1.0 / static_cast<double>(x.rows()));
  return tape_of(m).record(std::move(out), {m}, [m](Tape& tp, const Matrix& g) {
    const std::size_t r = m.rows();
    const double inv = 1.0 / static_cast<double>(r);
    Matrix d(r, m.cols());
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t c = 0; c < d.cols(); ++c) d(i, c) = g[c] * inv;
    tp.accumulate(m, d);
  });
}

Var row_sums(Var m) {
  return tape_of(m).record(row_sums(m.value()), {m}, [m](Tape& tp, const Matrix& g) {
    Matrix d(m.rows(), m.cols());
    for (std::size_t r = 0; r < d.rows(); ++r)
      for (std::size_t c = 0; c < d.cols(); ++c) d(r, c) = g[r];
    tp.accumulate(m, d);
  });
}

Var col_sums(Var m) {
  return tape_of(m).record(col_sums(m.value()), {m}, [m](Tape& tp, const Matrix& g) {
    Matrix d(m.rows(), m.cols());
    for (std::size_t r = 0; r < d.rows(); ++r)
      for (std::size_t c = 0; c < d.cols(); ++c) d(r, c) = g[c];
    tp.accumulate(m, d);
  });
}

Var scale_rows(Var a, Var s) {
  Tape& t = tape_of(a, s);
  const Matrix& av = a.value();
  const Matrix& sv = s.value();
  if (sv.cols() != 1 || sv.rows() != av.rows()) {
    throw ShapeError("scale_rows: " + av.shape_str() + " by " + sv.shape_str());
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= sv[r];
  return t.record(std::move(out), {a, s}, [a, s](Tape& tp, const Matrix& g) {
    const Matrix& av2 = a.value();
    const Matrix& sv2 = s.value();
    if (tp.requires_grad(a)) {
      Matrix d = g;
      for (std::size_t r = 0; r < d.rows(); ++r)
        for (std::size_t c = 0; c < d.cols(); ++c) d(r, c) *= sv2[r];
      tp.accumulate(a, d);
    }
    if (tp.requires_grad(s)) {
      Matrix d(sv2.rows(), 1);
      for (std::size_t r = 0; r < av2.rows(); ++r)
        for (std::size_t c = 0; c < av2.cols(); ++c) d[r] += g(r, c) * av2(r, c);
      tp.accumulate(s, d);
    }
  });
}

Var scale_cols(Var a, Var s) {
  Tape& t = tape_of(a, s);
  const Matrix& av = a.value();
  const Matrix& sv = s.value();
  if (sv.rows() != 1 || sv.cols() != av.cols()) {
    throw ShapeError("scale_cols: " + av.shape_str() + " by " + sv.shape_str());
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= sv[c];
  return t.record(std::move(out), {a, s}, [a, s](Tape& tp, const Matrix& g) {
    const Matrix& av2 = a.value();
    const Matrix& sv2 = s.value();
    if (tp.requires_grad(a)) {
      Matrix d = g;
      for (std::size_t r = 0; r < d.rows(); ++r)
        for (std::size_t c = 0; c < d.cols(); ++c) d(r, c) *= sv2[c];
      tp.accumulate(a, d);
    }
    if (tp.requires_grad(s)) {
      Matrix d(1, sv2.cols());
      for (std::size_t r = 0; r < av2.rows(); ++r)
        for (std::size_t c = 0; c < av2.cols(); ++c) d[c] += g(r, c) * av2(r, c);
      tp.accumulate(s, d);
    }
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Matrix out = a.value().reshaped(rows, cols);
  return tape_of(a).record(std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.reshaped(a.rows(), a.cols()));
  });
}

Var vstack(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("vstack: no parts");
  Tape& t = tape_of(parts.front());
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (Var p : parts) {
    tape_of(parts.front(), p);
    if (p.cols() != cols) {
      throw ShapeError("vstack: column mismatch " + parts.front().value().shape_str() + " vs " +
                       p.value().shape_str());
    }
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (Var p : parts) data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  std::vector<Var> owned(parts.begin(), parts.end());
  return t.record(Matrix(rows, cols, std::move(data)), owned,
                  [owned](Tape& tp, const Matrix& g) {
                    std::size_t offset = 0;
                    for (Var p : owned) {
                      const std::size_t n = p.value().size();
                      if (tp.requires_grad(p)) {
                        std::vector<double> slice(g.values().begin() + offset,
                                                  g.values().begin() + offset + n);
                        tp.accumulate(p, Matrix(p.rows(), p.cols(), std::move(slice)));
                      }
                      offset += n;
                    }
                  });
}

Var hstack(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("hstack: no parts");
  Tape& t = tape_of(parts.front());
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    tape_of(parts.front(), p);
    if (p.rows() != rows) {
      throw ShapeError("hstack: row mismatch " + parts.front().value().shape_str() + " vs " +
                       p.value().shape_str());
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Matrix& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
    offset += v.cols();
  }
  std::vector<Var> owned(parts.begin(), parts.end());
  return t.record(std::move(out), owned, [owned](Tape& tp, const Matrix& g) {
    std::size_t off = 0;
    for (Var p : owned) {
      if (tp.requires_grad(p)) {
        Matrix d(p.rows(), p.cols());
        for (std::size_t r = 0; r < d.rows(); ++r)
          for (std::size_t c = 0; c < d.cols(); ++c) d(r, c) = g(r, off + c);
        tp.accumulate(p, d);
      }
      off += p.cols();
    }
  });
}

Var scatter_rows(Var a, std::span<const std::size_t> index, std::size_t total_rows) {
  const Matrix& av = a.value();
  if (index.size() != av.rows()) {
    throw ShapeError("scatter_rows: " + std::to_string(index.size()) + " indices for " +
                     av.shape_str());
  }
  Matrix out(total_rows, av.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= total_rows) {
      throw IndexError("scatter_rows: target row " + std::to_string(index[r]) + " >= " +
                       std::to_string(total_rows));
    }
    for (std::size_t c = 0; c < av.cols(); ++c) out(index[r], c) = av(r, c);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return tape_of(a).record(std::move(out), {a},
                           [a, idx = std::move(idx)](Tape& tp, const Matrix& g) {
                             Matrix d(a.rows(), a.cols());
                             for (std::size_t r = 0; r < idx.size(); ++r)
                               for (std::size_t c = 0; c < d.cols(); ++c) d(r, c) = g(idx[r], c);
                             tp.accumulate(a, d);
                           });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Matrix& av = a.value();
  if (begin + count > av.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") of " + av.shape_str());
  }
  std::vector<double> data(av.values().begin() + begin * av.cols(),
                           av.values().begin() + (begin + count) * av.cols());
  return tape_of(a).record(Matrix(count, av.cols(), std::move(data)), {a},
                           [a, begin](Tape& tp, const Matrix& g) {
                             Matrix d(a.rows(), a.cols());
                             std::copy(g.values().begin(), g.values().end(),
                                       d.values().begin() + begin * d.cols());
                             tp.accumulate(a, d);
                           });
}

}  // namespace f3
