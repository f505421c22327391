#pragma once

#include "slr/loss.hpp"
#include "slr/toynet.hpp"

namespace slr {

struct SgdConfig {
  double base_lr = 0.02;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double poly_power = 0.9;
};

struct OptimizerState {
  SgdConfig config;
  TensorList velocity;  // mirrors the parameter shapes
};

OptimizerState make_optimizer(const ToyNet& net, const SgdConfig& config);

/// base_lr * (1 - step / max_iters)^power.
double poly_lr(double base_lr, const TrainClock& clock, double power = 0.9);

/// Classical momentum with coupled weight decay:
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - lr * v
/// Throws a runtime error naming the tensor on a non-finite gradient.
void sgd_step(ToyNet& net, const TensorList& grads, OptimizerState& state, double lr);

}  // namespace slr
