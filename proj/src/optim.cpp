#include "slr/optim.hpp"

#include <cmath>

#include "slr/error.hpp"

namespace slr {

OptimizerState make_optimizer(const ToyNet& net, const SgdConfig& config) {
  return OptimizerState{config, zeros_like(net.params())};
}

double poly_lr(double base_lr, const TrainClock& clock, double power) {
  clock.validate();
  const double progress = static_cast<double>(clock.step()) / static_cast<double>(clock.max_iters);
  return base_lr * std::pow(1.0 - progress, power);
}

void sgd_step(ToyNet& net, const TensorList& grads, OptimizerState& state, double lr) {
  TensorList& params = net.params();
  if (grads.size() != params.size() || state.velocity.size() != params.size()) {
    throw_validation("sgd_step: parameter, gradient and velocity lists differ in length");
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (grads[t].data.size() != params[t].data.size() || state.velocity[t].data.size() != params[t].data.size()) {
      throw_validation("sgd_step: shape mismatch for '" + params[t].name + "'");
    }
    for (std::size_t i = 0; i < grads[t].data.size(); ++i) {
      if (!std::isfinite(grads[t].data[i])) {
        throw_runtime("non-finite gradient in '" + params[t].name + "' at element " + std::to_string(i) +
                      " (value " + std::to_string(grads[t].data[i]) + ")");
      }
    }
  }
  const SgdConfig& c = state.config;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = params[t].data;
    auto& v = state.velocity[t].data;
    const auto& g = grads[t].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = c.momentum * v[i] + g[i] + c.weight_decay * p[i];
      p[i] -= lr * v[i];
    }
  }
}

}  // namespace slr
