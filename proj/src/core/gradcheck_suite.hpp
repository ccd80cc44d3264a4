// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/classifier.hpp"
#include "core/nn/gradcheck.hpp"

namespace ordino {

struct GradCheckCase {
  RepName rep = RepName::Pitch;
  Fusion fusion = Fusion::None;
  HeadKind head = HeadKind::Nll;
  std::string name;  // e.g. "fused/int/coral"
  nn::GradCheckReport report;
  double seconds = 0.0;
};

struct GradCheckSuiteOptions {
  nn::GradCheckOptions check;
  std::size_t max_length = 8;
  nn::Index hidden = 3;
  int layers = 2;
  std::uint64_t seed = 11;
  std::string filter;  // substring of the case name; empty runs everything
};

// Every representation (pitch, argnn, virtuoso, virtuoso_enc) without fusion plus
// the five fusions over argnn + virtuoso, crossed with the five heads.
std::vector<GradCheckCase> gradcheck_cases();

// End-to-end check of each case on random instances with T <= max_length, a batch of
// two samples, class weights and train-mode dropout.
std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSuiteOptions& options);

nlohmann::json gradcheck_to_json(const std::vector<GradCheckCase>& cases, double tolerance);

}  // namespace ordino
