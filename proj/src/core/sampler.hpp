// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ordino {

// Draws sample indices so every present class is equally likely, with replacement,
// in passes of one epoch (as many draws as samples). A single-class set is shuffled.
class BalancedSampler {
 public:
  BalancedSampler(std::span<const int> labels, std::uint64_t seed);

  std::vector<std::size_t> epoch();
  std::vector<std::vector<std::size_t>> epoch_batches(std::size_t batch_size);

 private:
  std::vector<std::vector<std::size_t>> by_class_;
  std::size_t total_ = 0;
  std::mt19937_64 rng_;
};

struct EpochScore {
  double acc_k = 0.0;
  double mse = 0.0;
};

// Higher acc_k wins, then lower mse; equal scores keep the earlier epoch.
bool improves(const EpochScore& candidate, const EpochScore& incumbent);

// 1-based epoch of the best score. Errors: InvalidArgument (empty history).
int best_epoch(std::span<const EpochScore> history);

class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Records the next epoch; returns true when it becomes the new best.
  bool update(const EpochScore& score);
  bool should_stop() const { return epochs_ > 0 && epochs_ - best_ >= patience_; }
  int best_epoch() const { return best_; }
  const EpochScore& best_score() const { return best_score_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_ = 0;
  EpochScore best_score_;
};

}  // namespace ordino
