// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "f3/numcore/ops.hpp"
#include "f3/numcore/tape.hpp"

// Differentiable counterparts of the kernels in ops.hpp. Every function
// records its result on the tape that owns its inputs.

namespace f3 {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

/// a (r x c) + row (1 x c) added to every row.
Var add_row_broadcast(Var a, Var row);
/// a (r x c) + col (r x 1) added to every column.
Var add_col_broadcast(Var a, Var col);

Var elementwise(UnaryOp op, Var m);
inline Var relu(Var m) { return elementwise(UnaryOp::relu, m); }
inline Var sigmoid(Var m) { return elementwise(UnaryOp::sigmoid, m); }
inline Var tanh(Var m) { return elementwise(UnaryOp::tanh, m); }
inline Var exp(Var m) { return elementwise(UnaryOp::exp, m); }
inline Var log(Var m) { return elementwise(UnaryOp::log, m); }

/// 1 / x entrywise; DomainError on zero entries.
Var reciprocal(Var m);
/// x^p entrywise for x > 0.
Var power(Var m, double p);

Var softmax_rows(Var m);
/// Mean clamped negative log-likelihood, 1x1.
Var cross_entropy(Var pred, std::span<const int> labels);

Var sum(Var m);        // 1x1
Var mean_rows(Var m);  // 1 x c, average of the rows
Var row_sums(Var m);   // r x 1
Var col_sums(Var m);   // 1 x c

/// diag(s) * a for a column s (r x 1).
Var scale_rows(Var a, Var s);
/// a * diag(s) for a row s (1 x c).
Var scale_cols(Var a, Var s);

/// Row-major reinterpretation; no data movement.
Var reshape(Var a, std::size_t rows, std::size_t cols);

Var vstack(std::span<const Var> parts);
Var hstack(std::span<const Var> parts);

/// Places row r of `a` at row `index[r]` of a `total_rows` x a.cols() zero matrix.
Var scatter_rows(Var a, std::span<const std::size_t> index, std::size_t total_rows);

/// Rows [begin, begin + count) of `a`.
Var slice_rows(Var a, std::size_t begin, std::size_t count);

}  // namespace f3
