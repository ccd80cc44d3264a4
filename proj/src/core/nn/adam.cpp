// SPDX-License-Identifier: Apache-2.0
#include "core/nn/adam.hpp"

#include <cmath>

#include "core/error.hpp"

namespace ordino::nn {

AdamStepStats adam_step(ParameterStore& store, const AdamConfig& config) {
  double sq = 0.0;
  for (const auto& p : store.all()) {
    if (!p.grad.allFinite()) {
      fail(ErrorCode::NonFiniteGradient, "non-finite gradient in parameter '" + p.name + "'");
    }
    sq += p.grad.squaredNorm();
  }
  AdamStepStats stats;
  stats.grad_norm = std::sqrt(sq);
  if (config.clip_norm > 0.0 && stats.grad_norm > config.clip_norm) {
    stats.clip_scale = config.clip_norm / stats.grad_norm;
  }

  for (auto& p : store.all()) {
    ++p.step_count;
    const auto t = static_cast<double>(p.step_count);
    const double bias1 = 1.0 - std::pow(config.beta1, t);
    const double bias2 = 1.0 - std::pow(config.beta2, t);
    const auto g = p.grad.array() * stats.clip_scale;
    p.adam_m = (config.beta1 * p.adam_m.array() + (1.0 - config.beta1) * g).matrix();
    p.adam_v = (config.beta2 * p.adam_v.array() + (1.0 - config.beta2) * g.square()).matrix();
    p.value.array() -= config.learning_rate * (p.adam_m.array() / bias1) /
                       ((p.adam_v.array() / bias2).sqrt() + config.epsilon);
    if (!p.value.allFinite()) {
      fail(ErrorCode::NonFiniteGradient, "parameter '" + p.name + "' became non-finite");
    }
  }
  return stats;
}

}  // namespace ordino::nn
