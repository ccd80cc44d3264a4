// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "core/nn/parameter.hpp"

namespace ordino::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1e-4;  // global L2 norm; <= 0 disables clipping
};

struct AdamStepStats {
  double grad_norm = 0.0;   // before clipping
  double clip_scale = 1.0;  // factor applied to every gradient
};

// Global-norm clipping followed by a bias-corrected Adam update of every parameter.
// Errors: NonFiniteGradient (nothing is modified in that case).
AdamStepStats adam_step(ParameterStore& store, const AdamConfig& config);

}  // namespace ordino::nn
