// SPDX-License-Identifier: Apache-2.0
#include "core/sampler.hpp"

#include <algorithm>
#include <map>

#include "core/error.hpp"

namespace ordino {

BalancedSampler::BalancedSampler(std::span<const int> labels, std::uint64_t seed) : rng_(seed) {
  if (labels.empty()) fail(ErrorCode::InsufficientData, "balanced sampler needs samples");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  for (auto& [label, idx] : groups) by_class_.push_back(std::move(idx));
  total_ = labels.size();
}

std::vector<std::size_t> BalancedSampler::epoch() {
  std::vector<std::size_t> out;
  if (by_class_.size() == 1) {
    out = by_class_.front();
    std::shuffle(out.begin(), out.end(), rng_);
    return out;
  }
  out.reserve(total_);
  std::uniform_int_distribution<std::size_t> pick_class(0, by_class_.size() - 1);
  for (std::size_t i = 0; i < total_; ++i) {
    const auto& members = by_class_[pick_class(rng_)];
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    out.push_back(members[pick(rng_)]);
  }
  return out;
}

std::vector<std::vector<std::size_t>> BalancedSampler::epoch_batches(std::size_t batch_size) {
  if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch size must be positive");
  const auto draws = epoch();
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < draws.size(); at += batch_size) {
    const auto end = std::min(draws.size(), at + batch_size);
    batches.emplace_back(draws.begin() + static_cast<std::ptrdiff_t>(at),
                         draws.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

bool improves(const EpochScore& candidate, const EpochScore& incumbent) {
  if (candidate.acc_k != incumbent.acc_k) return candidate.acc_k > incumbent.acc_k;
  return candidate.mse < incumbent.mse;
}

int best_epoch(std::span<const EpochScore> history) {
  if (history.empty()) fail(ErrorCode::InvalidArgument, "empty validation history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (improves(history[i], history[best])) best = i;
  }
  return static_cast<int>(best) + 1;
}

bool EarlyStopping::update(const EpochScore& score) {
  ++epochs_;
  if (best_ == 0 || improves(score, best_score_)) {
    best_ = epochs_;
    best_score_ = score;
    return true;
  }
  return false;
}

}  // namespace ordino
