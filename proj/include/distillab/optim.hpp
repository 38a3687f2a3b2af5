#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "distillab/autograd.hpp"

namespace distillab {

// Adam moments and hyperparameters. Moment tensors are created on the
// first step, one per parameter, in the order the parameters are passed.
template <typename T>
struct AdamState {
  std::uint64_t step_count = 0;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  double lr = 2.0e-4;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-6;
};

// Bias-corrected Adam update of every trainable parameter from its `grad`.
// All gradients are checked before anything is written, so a non-finite
// gradient raises NumericError and leaves parameters and state untouched.
template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState<T>& state);

template <typename T>
void zero_grads(const std::vector<Parameter<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

// Scalar function of parameters built on a fresh graph.
using GradCheckFn = std::function<Var<double>(Graph<double>&)>;

// Compares reverse-mode gradients of `f` with central differences of step
// `eps` over every coordinate of every trainable parameter and returns
// max |analytic − numeric| / max(1, |analytic|). Parameters are restored
// afterwards. `f` must bind the parameters through Graph::param.
double grad_check(const GradCheckFn& f, const std::vector<Parameter<double>*>& params, double eps = 1e-5);

// Convenience form over plain tensors: `f` receives one leaf per input.
double grad_check(const std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>& f,
                  const std::vector<Tensor<double>>& inputs, double eps = 1e-5);

}  // namespace distillab
