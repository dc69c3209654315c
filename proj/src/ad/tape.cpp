#include "turbo/ad/tape.hpp"

#include <fmt/format.h>

namespace turbo::ad {

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("Var: uninitialized handle");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

const Tensor& GradientMap::at(NodeId id) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) throw std::out_of_range(fmt::format("no gradient for node {}", id));
  return it->second;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v) const {
  if (v.tape() != this) throw std::logic_error("Var belongs to a different tape");
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.is_parameter = true;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    check_owned(p);
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    check_owned(p);
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::accumulate(NodeId id, Tensor grad) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (grad.shape() != n.value.shape()) {
    throw ShapeError(fmt::format("gradient shape {} does not match node shape {}", to_string(grad.shape()),
                                 to_string(n.value.shape())));
  }
  if (!n.has_grad) {
    n.grad = std::move(grad);
    n.has_grad = true;
    return;
  }
  auto dst = n.grad.data();
  auto src = grad.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

GradientMap Tape::backward(const Var& root) {
  check_owned(root);
  if (backward_done_) throw std::logic_error("backward: tape already consumed");
  if (root.value().numel() != 1) throw ShapeError("backward: root must be scalar, got " + to_string(root.shape()));
  backward_done_ = true;

  GradientMap out;
  if (nodes_[root.id()].requires_grad) {
    accumulate(root.id(), Tensor(root.shape(), 1.0));
    for (NodeId id = root.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.has_grad || !n.backward) continue;
      Tensor g = std::move(n.grad);
      n.has_grad = false;
      n.backward(*this, id, g);
      n.backward = nullptr;
    }
  }
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (!n.is_parameter) continue;
    out.grads_.emplace(id, n.has_grad ? std::move(n.grad) : Tensor(n.value.shape(), 0.0));
  }
  return out;
}

}  // namespace turbo::ad
