// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "f3/numcore/matrix.hpp"

namespace f3 {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of primitive matrix operations.
///
/// Nodes are appended in evaluation order, so replaying them backwards is a
/// valid topological order. A tape is single-threaded; build one per worker.
class Tape {
 public:
  /// Adjoint callback: receives the gradient of the node's output and
  /// accumulates into parents through Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient.
  Var parameter(Matrix value);
  /// Leaf that never receives a gradient.
  Var constant(Matrix value);

  /// Records an op result. `fn` is dropped when no parent requires a gradient.
  Var record(Matrix value, std::vector<Var> parents, BackwardFn fn);

  const Matrix& value(Var v) const;
  bool requires_grad(Var v) const;

  /// Gradient of the last backward() target w.r.t. `v`; zeros if `v` did not participate.
  Matrix grad(Var v) const;

  /// Seeds d(target)/d(target) = 1 for a 1x1 target and replays the tape.
  /// Gradients from an earlier call are discarded first.
  void backward(Var target);

  /// Adds `g` into the gradient slot of `v` (no-op for constants).
  void accumulate(Var v, const Matrix& g);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until something flows in
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var check(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace f3
