// SPDX-License-Identifier: Apache-2.0
#include "core/splits.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "core/error.hpp"
#include "core/synth.hpp"

namespace ordino {

std::string_view subset_string(Subset s) {
  switch (s) {
    case Subset::Train: return "train";
    case Subset::Val: return "val";
    case Subset::Test: return "test";
  }
  return "?";
}

Subset parse_subset(std::string_view text) {
  for (Subset s : {Subset::Train, Subset::Val, Subset::Test}) {
    if (subset_string(s) == text) return s;
  }
  fail(ErrorCode::ConfigError, "unknown subset '" + std::string(text) + "' (expected train|val|test)");
}

std::string_view strategy_string(SplitStrategy s) {
  return s == SplitStrategy::LengthLevel ? "length_level" : "composer_level";
}

SplitStrategy parse_strategy(std::string_view text) {
  if (text == "length_level") return SplitStrategy::LengthLevel;
  if (text == "composer_level") return SplitStrategy::ComposerLevel;
  fail(ErrorCode::ConfigError, "unknown split strategy '" + std::string(text) +
                                   "' (expected length_level|composer_level)");
}

std::vector<std::string> SplitPlan::ids(Subset subset) const {
  std::vector<std::string> out;
  for (const auto& [id, s] : assignment) {
    if (s == subset) out.push_back(id);
  }
  return out;
}

int length_bucket(std::size_t n_notes) {
  if (n_notes < 1) fail(ErrorCode::InvalidArgument, "length_bucket needs at least one note");
  return static_cast<int>(n_notes / 1000);
}

std::uint64_t fold_seed(std::uint64_t master_seed, int fold_id) {
  return hash_combine(hash_combine(master_seed, 0x5350'4C49'54ULL), static_cast<std::uint64_t>(fold_id));
}

std::string stratum_key(const ManifestEntry& e, SplitStrategy strategy) {
  const std::string second = strategy == SplitStrategy::LengthLevel
                                 ? std::to_string(length_bucket(std::max<std::size_t>(1, e.n_notes)))
                                 : e.composer;
  return std::to_string(e.label) + "|" + second;
}

SplitPlan make_split(const CorpusManifest& manifest, SplitStrategy strategy,
                     std::uint64_t master_seed, int fold_id) {
  if (manifest.entries.empty()) fail(ErrorCode::InsufficientData, "cannot split an empty manifest");
  SplitPlan plan;
  plan.fold_id = fold_id;
  plan.strategy = strategy;
  plan.master_seed = master_seed;
  plan.seed = fold_seed(master_seed, fold_id);
  std::mt19937_64 rng(plan.seed);

  std::map<std::string, std::vector<std::string>> strata;
  for (const auto& e : manifest.entries) strata[stratum_key(e, strategy)].push_back(e.piece_id);

  std::array<double, 3> assigned{0, 0, 0};
  double total = 0;
  const std::array<Subset, 3> subsets{Subset::Train, Subset::Val, Subset::Test};
  std::vector<std::string> pool;

  for (auto& [key, members] : strata) {
    std::sort(members.begin(), members.end());
    if (members.size() < kMinProportionalStratum) {
      pool.insert(pool.end(), members.begin(), members.end());
      continue;
    }
    const double n = static_cast<double>(members.size());
    std::array<std::size_t, 3> take{};
    std::size_t given = 0;
    for (int s = 0; s < 3; ++s) {
      take[static_cast<std::size_t>(s)] = static_cast<std::size_t>(std::floor(kSubsetFractions[s] * n + 1e-9));
      given += take[static_cast<std::size_t>(s)];
    }
    // Remaining seats go to the subsets furthest below their global target, one each.
    std::array<bool, 3> bumped{false, false, false};
    for (; given < members.size(); ++given) {
      int best = -1;
      double best_deficit = 0;
      for (int s = 0; s < 3; ++s) {
        if (bumped[static_cast<std::size_t>(s)]) continue;
        const double deficit = kSubsetFractions[s] * (total + n) -
                               (assigned[static_cast<std::size_t>(s)] + static_cast<double>(take[static_cast<std::size_t>(s)]));
        if (best < 0 || deficit > best_deficit + 1e-12) {
          best = s;
          best_deficit = deficit;
        }
      }
      bumped[static_cast<std::size_t>(best)] = true;
      ++take[static_cast<std::size_t>(best)];
    }
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t at = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t i = 0; i < take[static_cast<std::size_t>(s)]; ++i) {
        plan.assignment[members[at++]] = subsets[static_cast<std::size_t>(s)];
      }
      assigned[static_cast<std::size_t>(s)] += static_cast<double>(take[static_cast<std::size_t>(s)]);
    }
    total += n;
  }

  std::sort(pool.begin(), pool.end());
  std::shuffle(pool.begin(), pool.end(), rng);
  for (const auto& id : pool) {
    total += 1;
    int best = 0;
    double best_deficit = -1e300;
    for (int s = 0; s < 3; ++s) {
      const double deficit = kSubsetFractions[s] * total - assigned[static_cast<std::size_t>(s)];
      if (deficit > best_deficit + 1e-12) {
        best = s;
        best_deficit = deficit;
      }
    }
    plan.assignment[id] = subsets[static_cast<std::size_t>(best)];
    assigned[static_cast<std::size_t>(best)] += 1;
  }
  return plan;
}

std::vector<SplitPlan> make_splits(const CorpusManifest& manifest, SplitStrategy strategy,
                                   std::uint64_t master_seed) {
  std::vector<SplitPlan> plans;
  for (int f = 0; f < kFolds; ++f) plans.push_back(make_split(manifest, strategy, master_seed, f));
  return plans;
}

nlohmann::json split_to_json(const SplitPlan& plan) {
  nlohmann::json assignment = nlohmann::json::object();
  for (const auto& [id, s] : plan.assignment) assignment[id] = subset_string(s);
  return {{"fold", plan.fold_id},
          {"strategy", strategy_string(plan.strategy)},
          {"master_seed", plan.master_seed},
          {"seed", plan.seed},
          {"assignment", assignment}};
}

SplitPlan split_from_json(const nlohmann::json& j) {
  try {
    SplitPlan plan;
    plan.fold_id = j.at("fold").get<int>();
    plan.strategy = parse_strategy(j.at("strategy").get<std::string>());
    plan.master_seed = j.at("master_seed").get<std::uint64_t>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [id, s] : j.at("assignment").items()) plan.assignment[id] = parse_subset(s.get<std::string>());
    return plan;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::FormatError, std::string("malformed split plan: ") + e.what());
  }
}

}  // namespace ordino
