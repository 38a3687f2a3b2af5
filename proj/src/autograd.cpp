#include "distillab/autograd.hpp"

#include <stdexcept>

namespace distillab {

template <typename T>
Var<T> Graph<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::leaf(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::param(Parameter<T>& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = grad_enabled_ && p.trainable;
  if (n.requires_grad) n.param = &p;
  return push(std::move(n));
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, std::span<const Var<T>> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const auto& in : inputs) {
      if (in.graph_ != this) throw std::logic_error("operation mixes nodes from different graphs");
      if (nodes_[in.id_].requires_grad) n.requires_grad = true;
    }
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

template <typename T>
const Tensor<T>& Graph<T>::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.shape() != n.value.shape()) {
    // Never reached by backward: report zeros with the value's shape.
    n.grad = Tensor<T>(n.value.shape());
  }
  return n.grad;
}

template <typename T>
Tensor<T>* Graph<T>::grad_target(const Var<T>& v) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return nullptr;
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor<T>(n.value.shape());
  return &n.grad;
}

template <typename T>
void Graph<T>::backward(const Var<T>& loss) {
  if (backward_done_) throw std::logic_error("backward already ran on this graph; rebuild it with a new forward pass");
  if (loss.graph_ != this) throw std::logic_error("loss belongs to a different graph");
  backward_done_ = true;
  Node& root = nodes_[loss.id_];
  if (root.value.size() != 1) throw DimensionError("backward needs a scalar loss, got shape " + shape_str(root.value.shape()));
  if (!root.requires_grad) return;
  root.grad = Tensor<T>(root.value.shape(), T(1));

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.shape() != n.value.shape()) continue;
    if (n.backward) n.backward(*this, n.value, n.grad);
    if (n.param) {
      Parameter<T>& p = *n.param;
      if (p.grad.shape() != p.value.shape()) p.grad = Tensor<T>(p.value.shape());
      for (std::size_t k = 0; k < n.grad.size(); ++k) p.grad[k] += n.grad[k];
    }
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace distillab
