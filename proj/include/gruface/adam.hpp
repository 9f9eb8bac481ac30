#pragma once

#include <cmath>

#include "gruface/backward.hpp"

namespace gruface {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  ModelParams first_moment;
  ModelParams second_moment;
  long step = 0;

  static AdamState fresh(const ModelParams& params, AdamConfig config = {}) {
    return {config, zeros_like(params), zeros_like(params), 0};
  }
};

/// Bias-corrected Adam update in place. Throws before touching anything if
/// the gradient holds a non-finite value.
inline void adam_step(AdamState& state, ModelParams& params, const GradientSet& grads) {
  auto theta = params.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  const auto g = grads.tensors();
  require(theta.size() == g.size() && theta.size() == m.size() && theta.size() == v.size(),
          ErrorCode::shape_mismatch, "optimizer state and gradients do not match the parameter set");
  for (std::size_t i = 0; i < theta.size(); ++i) {
    require(theta[i].values.size() == g[i].values.size() && theta[i].values.size() == m[i].values.size(),
            ErrorCode::shape_mismatch, "gradient for " + theta[i].name + " has the wrong size");
    for (std::size_t j = 0; j < g[i].values.size(); ++j) {
      if (!std::isfinite(g[i].values[j])) {
        fail(ErrorCode::non_finite, "non-finite gradient " + std::to_string(g[i].values[j]) + " in " +
                                        g[i].name + "[" + std::to_string(j) + "] at optimizer step " +
                                        std::to_string(state.step + 1));
      }
    }
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    for (std::size_t j = 0; j < theta[i].values.size(); ++j) {
      const double grad = g[i].values[j];
      double& mj = m[i].values[j];
      double& vj = v[i].values[j];
      mj = c.beta1 * mj + (1.0 - c.beta1) * grad;
      vj = c.beta2 * vj + (1.0 - c.beta2) * grad * grad;
      theta[i].values[j] -= c.learning_rate * (mj / correction1) / (std::sqrt(vj / correction2) + c.epsilon);
    }
  }
}

}  // namespace gruface
