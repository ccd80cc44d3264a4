// SPDX-License-Identifier: Apache-2.0
#include "core/ensemble.hpp"

#include <algorithm>
#include <map>

#include "core/error.hpp"
#include "core/losses.hpp"

namespace ordino {

std::vector<PredictionRecord> ensemble_predict(const std::vector<std::vector<PredictionRecord>>& members) {
  if (members.empty()) fail(ErrorCode::InvalidArgument, "ensemble needs at least one member");
  std::map<std::string, std::vector<const nn::Vector*>> by_piece;
  nn::Index k = -1;
  for (std::size_t m = 0; m < members.size(); ++m) {
    for (const auto& rec : members[m]) {
      if (k < 0) k = rec.distribution.size();
      if (rec.distribution.size() != k) {
        fail(ErrorCode::ShapeMismatch, "ensemble members disagree on the number of classes");
      }
      auto& slot = by_piece[rec.piece_id];
      if (slot.size() != m) {
        fail(ErrorCode::CoverageMismatch, "piece '" + rec.piece_id + "' appears twice in member " + std::to_string(m));
      }
      slot.push_back(&rec.distribution);
    }
  }
  std::vector<PredictionRecord> out;
  for (auto& [id, dists] : by_piece) {
    if (dists.size() != members.size()) {
      fail(ErrorCode::CoverageMismatch, "piece '" + id + "' is covered by " + std::to_string(dists.size()) +
                                            " of " + std::to_string(members.size()) + " members");
    }
    // Summing in a canonical order keeps the mean bit-identical under member permutation.
    std::sort(dists.begin(), dists.end(), [](const nn::Vector* a, const nn::Vector* b) {
      return std::lexicographical_compare(a->data(), a->data() + a->size(), b->data(), b->data() + b->size());
    });
    nn::Vector mean = nn::Vector::Zero(k);
    for (const auto* d : dists) mean += *d;
    mean /= static_cast<double>(dists.size());
    PredictionRecord rec;
    rec.piece_id = id;
    rec.raw = mean;
    rec.distribution = mean;
    rec.label = argmax_lowest(std::span<const double>(mean.data(), static_cast<std::size_t>(mean.size()))) + 1;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace ordino
