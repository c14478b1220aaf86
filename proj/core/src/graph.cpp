#include <utility>

#include "pa/error.hpp"
#include "pa/grad.hpp"

namespace pa::grad {

const Tensor& Var::value() const { return graph_->value(id_); }

const Tensor& Gradients::of(const Var& x) const {
  auto it = by_leaf_.find(x.id());
  if (it == by_leaf_.end()) {
    throw Error(ErrorKind::Domain, "gradient requested for node " + std::to_string(x.id()) +
                                       " which is not a differentiable leaf");
  }
  return it->second;
}

Tensor* GradSink::slot(std::size_t node) {
  if (!graph_.requires_grad(node)) return nullptr;
  Tensor& buf = buffers_[node];
  if (buf.empty()) buf = Tensor(graph_.value(node).shape());
  return &buf;
}

Var Graph::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), true, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), false, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  for (std::size_t in : inputs) needs = needs || nodes_[in].requires_grad;
  Node n{std::move(value), needs, false, {}};
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Gradients Graph::backward(const Var& output) const {
  if (&output.graph() != this) {
    throw Error(ErrorKind::Domain, "backward: output belongs to another graph");
  }
  if (!output.value().shape().is_scalar()) {
    throw Error(ErrorKind::Shape, "backward: output must be 1x1x1, got " +
                                      to_string(output.value().shape()));
  }
  std::vector<Tensor> buffers(nodes_.size());
  GradSink sink(*this, buffers);
  if (Tensor* seed = sink.slot(output.id())) (*seed)[0] = 1.0;

  for (std::size_t k = output.id() + 1; k-- > 0;) {
    const Node& n = nodes_[k];
    if (n.is_leaf || !n.requires_grad || buffers[k].empty()) continue;
    n.backward(buffers[k], sink);
  }

  Gradients g;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!nodes_[k].is_leaf || !nodes_[k].requires_grad) continue;
    g.by_leaf_.emplace(k, buffers[k].empty() ? Tensor(nodes_[k].value.shape())
                                             : std::move(buffers[k]));
  }
  return g;
}

}  // namespace pa::grad
