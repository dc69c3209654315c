#pragma once

// Define-by-run gradient tape. Nodes are appended in evaluation order, so
// parents always precede children and a reverse sweep is a valid
// topological order. A tape supports exactly one backward pass.

#include <functional>
#include <unordered_map>
#include <vector>

#include "turbo/ad/tensor.hpp"

namespace turbo::ad {

using NodeId = std::size_t;
class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  NodeId id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

/// Gradients of the root with respect to every parameter leaf.
class GradientMap {
 public:
  const Tensor& at(const Var& v) const { return at(v.id()); }
  const Tensor& at(NodeId id) const;
  bool contains(NodeId id) const { return grads_.count(id) != 0; }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::unordered_map<NodeId, Tensor> grads_;
};

class Tape {
 public:
  /// Receives the gradient flowing into `self` and pushes contributions to
  /// its parents through accumulate().
  using Backward = std::function<void(Tape& tape, NodeId self, const Tensor& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf without gradient tracking.
  Var constant(Tensor value);
  /// Leaf whose gradient is reported by backward().
  Var parameter(Tensor value);

  /// Appends an interior node. It requires a gradient iff some parent does;
  /// when none does, `backward` is dropped.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
  Var record(Tensor value, const std::vector<Var>& parents, Backward backward);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `grad` into the pending gradient of `id`; ignored for nodes that
  /// do not require a gradient.
  void accumulate(NodeId id, Tensor grad);

  /// Reverse sweep from a one-element root.
  GradientMap backward(const Var& root);

 private:
  struct Node {
    Tensor value;
    Backward backward;
    bool requires_grad = false;
    bool is_parameter = false;
    bool has_grad = false;
    Tensor grad;
  };

  Var push(Node node);
  void check_owned(const Var& v) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace turbo::ad
