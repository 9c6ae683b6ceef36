// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "f3/numcore/matrix.hpp"
#include "f3/numcore/tape.hpp"

namespace f3 {

/// D^{-1/2} (A + I) D^{-1/2}, D the row-degree matrix of A + I.
/// Entries of A must lie in [0, 1]; the added self-loops keep every degree positive.
Matrix normalize_adjacency(const Matrix& a);

/// Differentiable version of the above.
Var normalize_adjacency(Var a);

}  // namespace f3
