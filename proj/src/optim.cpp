#include "distillab/optim.hpp"

#include <algorithm>
#include <cmath>

namespace distillab {

template <typename T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState<T>& state) {
  if (!(state.lr >= 0.0)) throw ArgumentError("adam: learning rate must be non-negative");
  for (const auto* p : params) {
    if (!p->trainable || p->grad.empty()) continue;
    if (p->grad.shape() != p->value.shape()) {
      throw DimensionError("adam: gradient of '" + p->name + "' has shape " + shape_str(p->grad.shape()) +
                           ", parameter has " + shape_str(p->value.shape()));
    }
    for (T g : p->grad.data()) {
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in '" + p->name + "'");
    }
  }
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.emplace_back(p->value.shape());
      state.second_moment.emplace_back(p->value.shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam: state tracks " + std::to_string(state.first_moment.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].shape() != params[i]->value.shape()) {
      throw DimensionError("adam: moment shape mismatch for '" + params[i]->name + "'");
    }
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = *params[i];
    if (!p.trainable || p.grad.empty()) continue;
    Tensor<T>& m = state.first_moment[i];
    Tensor<T>& v = state.second_moment[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      const double mk = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      const double vk = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = state.lr * (mk / c1) / (std::sqrt(vk / c2) + state.epsilon);
      p.value[k] = static_cast<T>(p.value[k] - update);
    }
  }
}

template void adam_step<float>(const std::vector<Parameter<float>*>&, AdamState<float>&);
template void adam_step<double>(const std::vector<Parameter<double>*>&, AdamState<double>&);

namespace {

double evaluate(const GradCheckFn& f) {
  Graph<double> g(Mode::eval, false);
  const double v = f(g).value()[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}

}  // namespace

double grad_check(const GradCheckFn& f, const std::vector<Parameter<double>*>& params, double eps) {
  for (auto* p : params) p->zero_grad();
  {
    Graph<double> g(Mode::eval, true);
    Var<double> out = f(g);
    if (!std::isfinite(out.value()[0])) throw NumericError("grad_check: function value is not finite");
    g.backward(out);
  }
  double worst = 0.0;
  for (auto* p : params) {
    if (!p->trainable) continue;
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double saved = p->value[k];
      p->value[k] = saved + eps;
      const double up = evaluate(f);
      p->value[k] = saved - eps;
      const double down = evaluate(f);
      p->value[k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad[k];
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
    }
  }
  return worst;
}

double grad_check(const std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>& f,
                  const std::vector<Tensor<double>>& inputs, double eps) {
  std::vector<Parameter<double>> storage(inputs.size());
  std::vector<Parameter<double>*> params;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    storage[i].name = "input" + std::to_string(i);
    storage[i].value = inputs[i];
    params.push_back(&storage[i]);
  }
  auto wrapped = [&](Graph<double>& g) {
    std::vector<Var<double>> vars;
    for (auto& p : storage) vars.push_back(g.param(p));
    return f(g, vars);
  };
  return grad_check(wrapped, params, eps);
}

}  // namespace distillab
