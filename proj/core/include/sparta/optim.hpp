#pragma once

#include <cstdint>
#include <vector>

#include "sparta/params.hpp"

namespace sparta {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step_count = 0;
};

OptimizerState make_adam_state(const ParameterStore& params, AdamConfig config);

/// One bias-corrected Adam update. Frozen parameters are left untouched.
void adam_step(ParameterStore& params, const GradientStore& grads, OptimizerState& state);

}  // namespace sparta
