// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "core/pemb.hpp"
#include "core/score.hpp"

namespace ordino {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);

// Deterministic stand-ins for backbone embeddings: each cell is a hash of
// (seed, representation tag, column, previous/current/next pitch) mapped to [-1, 1].
// Rows follow canonical note order, restricted to `hand` when given.
EmbeddingMatrix synth_embedding(const NoteSequence& seq, std::uint32_t dim, std::uint64_t seed,
                                std::uint64_t rep_tag, const Hand* hand = nullptr);

}  // namespace ordino
