// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "attnocr/autodiff/tensor.hpp"

namespace attnocr {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  Shape shape() const { return value().shape; }
  std::size_t size() const { return value().size(); }
  double item() const;
  const std::vector<double>& grad() const;
};

/// Computation record for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the node list is always a
/// topological order. Each op node keeps a forward rule (used both when it is
/// created and by replay()) and a backward rule that pushes its output
/// gradient into its inputs. Leaves either own their value or are bound to an
/// external parameter tensor; bound leaves re-read the parameter on replay and
/// receive their gradient in Tensor::grad after backward().
class Tape {
 public:
  struct Node {
    Tensor out;                 // out.grad is the adjoint during backward
    std::vector<std::size_t> inputs;
    std::function<void(Tape&, Node&)> forward;
    std::function<void(Tape&, Node&)> backward;
    Tensor* bound = nullptr;    // external parameter, for bound leaves
    bool needs_grad = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor t) {
    Node n;
    n.out = std::move(t);
    n.out.set_requires_grad(false);
    return push(std::move(n));
  }

  /// Owned leaf that participates in differentiation.
  Var leaf(Tensor t) {
    Node n;
    n.out = std::move(t);
    n.needs_grad = true;
    n.out.requires_grad = true;
    return push(std::move(n));
  }

  /// Leaf bound to a model parameter. Repeated calls with the same tensor
  /// return the same node, so one parameter feeds many uses.
  Var param(Tensor& p) {
    for (std::size_t id : bound_ids_)
      if (nodes_[id].bound == &p) return Var{this, id};
    Node n;
    n.out = Tensor(p.shape, p.values);
    n.bound = &p;
    n.needs_grad = p.requires_grad;
    n.forward = [](Tape&, Node& self) { self.out.values = self.bound->values; };
    Var v = push(std::move(n));
    bound_ids_.push_back(v.id);
    return v;
  }

  /// Appends an op node, evaluates it, and returns its handle.
  Var op(Shape out_shape, std::vector<std::size_t> inputs,
         std::function<void(Tape&, Node&)> forward,
         std::function<void(Tape&, Node&)> backward) {
    Node n;
    n.out = Tensor(std::move(out_shape));
    n.inputs = std::move(inputs);
    for (std::size_t i : n.inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
    n.forward = std::move(forward);
    n.backward = std::move(backward);
    Var v = push(std::move(n));
    Node& self = nodes_[v.id];
    self.forward(*this, self);
    return v;
  }

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  Tensor& out(std::size_t id) { return nodes_[id].out; }
  std::size_t size() const { return nodes_.size(); }

  /// Re-runs every forward rule in record order.
  void replay() {
    for (Node& n : nodes_)
      if (n.forward) n.forward(*this, n);
  }

  /// Reverse sweep from a scalar loss. Gradients of bound parameters are
  /// accumulated (+=) into their Tensor::grad; owned leaves keep theirs in
  /// the node. Parameters that the loss does not reach get zero.
  void backward(Var loss) {
    if (loss.tape != this || loss.id >= nodes_.size())
      fail(ErrorKind::shape, "backward: loss is not a node of this record");
    Node& root = nodes_[loss.id];
    if (root.out.size() != 1)
      fail(ErrorKind::shape, "backward: loss must be scalar, got shape " + shape_str(root.out.shape));
    if (!root.needs_grad)
      fail(ErrorKind::shape, "backward: loss does not depend on any differentiable input");

    for (Node& n : nodes_) {
      if (n.needs_grad)
        n.out.grad.assign(n.out.size(), 0.0);
      else
        n.out.grad.clear();
    }
    root.out.grad[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.needs_grad && n.backward) n.backward(*this, n);
    }
    for (std::size_t id : bound_ids_) {
      Node& n = nodes_[id];
      if (!n.bound->requires_grad) continue;
      if (n.bound->grad.size() != n.out.size()) n.bound->grad.assign(n.out.size(), 0.0);
      for (std::size_t k = 0; k < n.out.size(); ++k) n.bound->grad[k] += n.out.grad[k];
    }
  }

  /// Adjoint slot of an input, or nullptr when that input is not differentiable.
  double* grad_of(std::size_t id) {
    Node& n = nodes_[id];
    return n.needs_grad ? n.out.grad.data() : nullptr;
  }

 private:
  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::vector<std::size_t> bound_ids_;
};

inline const Tensor& Var::value() const { return tape->node(id).out; }

inline double Var::item() const {
  const Tensor& t = value();
  if (t.size() != 1) fail(ErrorKind::shape, "item() on non-scalar " + shape_str(t.shape));
  return t.values[0];
}

inline const std::vector<double>& Var::grad() const { return tape->node(id).out.grad; }

using ComputationRecord = Tape;

}  // namespace attnocr
