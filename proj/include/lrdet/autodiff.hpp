#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lrdet/tensor.hpp"

namespace lrdet {

class Tape;
using NodeId = std::size_t;

// A tensor value with optional linkage to a gradient tape. Untracked vars are
// constants; any op with at least one tracked operand records a tape node.
class Var {
 public:
  Var() = default;
  Var(Tensor value) : value_(std::move(value)) {}  // NOLINT: constants convert implicitly

  const Tensor& value() const { return value_; }
  const Shape& shape() const { return value_.shape(); }
  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  NodeId node() const { return node_; }

  // Same value, no tape linkage.
  Var detached() const { return Var(value_); }

 private:
  friend class Tape;
  Tensor value_;
  Tape* tape_ = nullptr;
  NodeId node_ = 0;
};

// Gradients of one backward pass, indexed by tape node.
class Gradients {
 public:
  // Gradient w.r.t. `v`; zeros when `v` is not reachable from the root.
  Tensor of(const Var& v) const;

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
};

// Append-only record of differentiable operations. Nodes are created in
// execution order, so ids are topologically sorted.
class Tape {
 public:
  // Accumulates into `parent_grads[i]` (null when operand i is untracked).
  using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);

  // Used by op implementations. Returns an untracked var when no operand is tracked.
  static Var record(Tensor value, std::span<const Var* const> operands, BackwardFn backward);

  // Reverse sweep from a single-element root. Every reachable node is visited
  // once, in reverse creation order.
  Gradients backward(const Var& root) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<NodeId> parents;  // kNoParent for untracked operands
    Shape shape;
    BackwardFn backward;          // empty for leaves
  };
  static constexpr NodeId kNoParent = static_cast<NodeId>(-1);

  std::vector<Node> nodes_;
};

}  // namespace lrdet
