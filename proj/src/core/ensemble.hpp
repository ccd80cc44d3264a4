// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "core/metrics.hpp"
#include "core/nn/parameter.hpp"

namespace ordino {

struct PredictionRecord {
  std::string piece_id;
  nn::Vector raw;           // head activations
  nn::Vector distribution;  // sums to 1
  Prediction label;         // nullopt = undefined decode
};

// Per piece, the mean of the member distributions and its argmax (lowest level on ties).
// Output is ordered by piece_id and does not depend on member order.
// Errors: CoverageMismatch (members cover different pieces), ShapeMismatch (K differs).
std::vector<PredictionRecord> ensemble_predict(const std::vector<std::vector<PredictionRecord>>& members);

}  // namespace ordino
