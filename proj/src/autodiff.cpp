#include "lrdet/autodiff.hpp"

#include "lrdet/errors.hpp"

namespace lrdet {

Tensor Gradients::of(const Var& v) const {
  if (v.tracked() && v.node() < grads_.size() && !grads_[v.node()].empty()) return grads_[v.node()];
  return Tensor(v.shape());
}

Var Tape::leaf(Tensor value) {
  Var v(std::move(value));
  v.tape_ = this;
  v.node_ = nodes_.size();
  nodes_.push_back(Node{{}, v.shape(), {}});
  return v;
}

Var Tape::record(Tensor value, std::span<const Var* const> operands, BackwardFn backward) {
  Tape* tape = nullptr;
  for (const Var* op : operands) {
    if (!op->tracked()) continue;
    LRDET_REQUIRE(tape == nullptr || tape == op->tape(), "operands belong to different tapes");
    tape = op->tape();
  }
  Var out(std::move(value));
  if (tape == nullptr) return out;

  Node node;
  node.shape = out.shape();
  node.backward = std::move(backward);
  node.parents.reserve(operands.size());
  for (const Var* op : operands) node.parents.push_back(op->tracked() ? op->node() : kNoParent);
  out.tape_ = tape;
  out.node_ = tape->nodes_.size();
  tape->nodes_.push_back(std::move(node));
  return out;
}

Gradients Tape::backward(const Var& root) const {
  LRDET_REQUIRE(root.tracked() && root.tape() == this, "backward root is not on this tape");
  LRDET_REQUIRE(root.value().size() == 1, "backward root must be scalar, got shape " + shape_str(root.shape()));

  Gradients result;
  auto& grads = result.grads_;
  grads.resize(nodes_.size());
  grads[root.node()] = Tensor(root.shape(), 1.0f);

  std::vector<Tensor*> slots;
  for (NodeId id = root.node() + 1; id-- > 0;) {
    if (grads[id].empty()) continue;
    const Node& node = nodes_[id];
    if (!node.backward) continue;  // leaf: keep its gradient

    slots.assign(node.parents.size(), nullptr);
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      NodeId p = node.parents[i];
      if (p == kNoParent) continue;
      if (grads[p].empty()) grads[p] = Tensor(nodes_[p].shape);
      slots[i] = &grads[p];
    }
    node.backward(grads[id], slots);
    grads[id] = Tensor();  // interior gradients are not needed after propagation
  }
  return result;
}

}  // namespace lrdet
