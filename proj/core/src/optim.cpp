#include "sparta/optim.hpp"

#include <cmath>

#include "sparta/error.hpp"

namespace sparta {

OptimizerState make_adam_state(const ParameterStore& params, AdamConfig config) {
  OptimizerState s;
  s.config = config;
  for (const auto& p : params.parameters()) {
    s.first_moment.push_back(Tensor::zeros_like(p.tensor));
    s.second_moment.push_back(Tensor::zeros_like(p.tensor));
  }
  return s;
}

void adam_step(ParameterStore& params, const GradientStore& grads, OptimizerState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size())
    throw ShapeError("optimizer state does not match the parameter store");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads[i].shape() != params.at(i).tensor.shape())
      throw ShapeError("gradient for '" + params.at(i).name + "' has shape " +
                       shape_string(grads[i].shape()) + ", parameter has " +
                       shape_string(params.at(i).tensor.shape()));

  ++state.step_count;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step_count);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params.at(i);
    if (!p.trainable) continue;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correct1;
      const double v_hat = v[j] / correct2;
      p.tensor[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace sparta
