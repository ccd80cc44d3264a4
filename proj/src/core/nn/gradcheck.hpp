// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "core/nn/parameter.hpp"

namespace ordino::nn {

struct GradCheckOptions {
  double epsilon = 1e-4;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps near-zero
  // gradients from dividing by rounding noise.
  double denominator_floor = 1e-6;
  // A failing entry is re-probed with steps epsilon/10, epsilon/100, ... and keeps its
  // best agreement. A perturbation that straddles a ReLU kink disagrees only at the
  // larger steps; a wrong analytic gradient disagrees at all of them.
  int refinements = 2;
  std::size_t max_entries = 1000;  // above this, a seeded random subsample is checked
  std::uint64_t seed = 7;
  std::size_t max_reported_failures = 20;
};

struct GradCheckFailure {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t checked_entries = 0;
  std::size_t total_entries = 0;
  std::size_t failure_count = 0;
  std::vector<GradCheckFailure> failures;  // first max_reported_failures

  bool passed() const { return failure_count == 0; }
};

// loss(true) must zero the gradients of `store`, evaluate the loss and accumulate
// analytic gradients; loss(false) evaluates the loss only. Parameters are perturbed
// in place and restored exactly.
using LossFunction = std::function<double(bool with_gradient)>;

GradCheckReport grad_check(ParameterStore& store, const LossFunction& loss,
                           const GradCheckOptions& options = {});

}  // namespace ordino::nn
