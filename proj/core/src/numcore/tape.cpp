// SPDX-License-Identifier: Apache-2.0
#include "f3/numcore/tape.hpp"

#include "f3/numcore/errors.hpp"

namespace f3 {

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw ContractError("Var: not attached to a tape");
  return tape_->value(*this);
}

Var Tape::check(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw ContractError("Tape: variable belongs to a different tape");
  }
  return v;
}

Var Tape::parameter(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::vector<Var> parents, BackwardFn fn) {
  bool needs = false;
  for (Var p : parents) needs = needs || nodes_[check(p).id_].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

const Matrix& Tape::value(Var v) const { return nodes_[check(v).id_].value; }

bool Tape::requires_grad(Var v) const { return nodes_[check(v).id_].requires_grad; }

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[check(v).id_];
  if (n.grad.empty() && !n.value.empty()) return Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[check(v).id_];
  if (!n.requires_grad) return;
  if (!g.same_shape(n.value)) {
    throw ShapeError("Tape::accumulate: gradient " + g.shape_str() + " for value " +
                     n.value.shape_str());
  }
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

void Tape::backward(Var target) {
  const std::size_t root = check(target).id_;
  if (nodes_[root].value.size() != 1) {
    throw ShapeError("Tape::backward: target must be 1x1, got " + nodes_[root].value.shape_str());
  }
  for (Node& n : nodes_) n.grad = Matrix();
  if (!nodes_[root].requires_grad) return;
  nodes_[root].grad = Matrix(1, 1, 1.0);
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    // Copy: the callback may accumulate into other slots of nodes_.
    const Matrix g = n.grad;
    n.backward(*this, g);
  }
}

}  // namespace f3
