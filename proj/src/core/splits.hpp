// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "core/manifest.hpp"

namespace ordino {

enum class Subset { Train, Val, Test };
enum class SplitStrategy { LengthLevel, ComposerLevel };

std::string_view subset_string(Subset s);
Subset parse_subset(std::string_view text);
std::string_view strategy_string(SplitStrategy s);
SplitStrategy parse_strategy(std::string_view text);  // length_level | composer_level

struct SplitPlan {
  int fold_id = 0;
  SplitStrategy strategy = SplitStrategy::LengthLevel;
  std::uint64_t master_seed = 0;
  std::uint64_t seed = 0;  // this fold's derived seed
  std::map<std::string, Subset> assignment;

  std::vector<std::string> ids(Subset subset) const;  // sorted
};

constexpr int kFolds = 5;
constexpr double kSubsetFractions[3] = {0.6, 0.2, 0.2};
constexpr std::size_t kMinProportionalStratum = 5;

// floor(n_notes / 1000).
int length_bucket(std::size_t n_notes);

std::uint64_t fold_seed(std::uint64_t master_seed, int fold_id);

// One plan: strata of at least five pieces are split proportionally (each subset gets
// floor or ceil of its share), smaller strata are pooled and dealt out at random toward
// the global 60/20/20 target. Errors: InsufficientData (empty manifest).
SplitPlan make_split(const CorpusManifest& manifest, SplitStrategy strategy,
                     std::uint64_t master_seed, int fold_id);
std::vector<SplitPlan> make_splits(const CorpusManifest& manifest, SplitStrategy strategy,
                                   std::uint64_t master_seed);

// Stratum key of an entry, e.g. "3|1" or "3|Chopin".
std::string stratum_key(const ManifestEntry& entry, SplitStrategy strategy);

nlohmann::json split_to_json(const SplitPlan& plan);
SplitPlan split_from_json(const nlohmann::json& j);

}  // namespace ordino
