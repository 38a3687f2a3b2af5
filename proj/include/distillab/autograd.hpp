#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>

#include "distillab/tensor.hpp"

namespace distillab {

enum class Mode { train, eval };

// Trainable tensor with its accumulated gradient. Gradients from every
// graph the parameter takes part in add up here until zero_grad().
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  void zero_grad() {
    if (grad.shape() != value.shape()) {
      grad = Tensor<T>(value.shape());
    } else {
      grad.fill(T(0));
    }
  }
};

template <typename T>
class Graph;

// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;

  const Tensor<T>& value() const;
  const Tensor<T>& grad() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  bool requires_grad() const;
  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph<T>;
  Var(Graph<T>* g, std::size_t id) : graph_(g), id_(id) {}

  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Tape of operations in creation order, which is a topological order by
// construction. Single-use: backward() may run once; a second call throws.
template <typename T>
class Graph {
 public:
  // Receives the node's output value and gradient; pushes contributions to
  // its inputs through grad_target().
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& out, const Tensor<T>& out_grad)>;

  explicit Graph(Mode mode = Mode::eval, bool grad_enabled = true) : mode_(mode), grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Mode mode() const { return mode_; }
  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Tensor<T> value);
  // Differentiable input whose gradient stays on the graph (read via Var::grad()).
  Var<T> leaf(Tensor<T> value);
  // Differentiable input whose gradient is added to `p.grad` after backward.
  // Frozen parameters and no-grad graphs bind as constants.
  Var<T> param(Parameter<T>& p);

  Var<T> record(Tensor<T> value, std::span<const Var<T>> inputs, BackwardFn backward);
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward) {
    return record(std::move(value), std::span<const Var<T>>(inputs.begin(), inputs.size()), std::move(backward));
  }

  void backward(const Var<T>& loss);
  bool backward_done() const { return backward_done_; }

  std::size_t size() const { return nodes_.size(); }
  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor<T>& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Zero-initialized gradient buffer of `v`, or nullptr when `v` does not
  // take gradients.
  Tensor<T>* grad_target(const Var<T>& v);

 private:
  struct Node {
    Tensor<T> value;
    mutable Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Var<T> push(Node node);

  Mode mode_;
  bool grad_enabled_;
  bool backward_done_ = false;
  std::deque<Node> nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}

template <typename T>
const Tensor<T>& Var<T>::grad() const {
  return graph_->grad(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return graph_->requires_grad(id_);
}

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace distillab
