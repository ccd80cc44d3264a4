// SPDX-License-Identifier: Apache-2.0
#include "core/synth.hpp"

namespace ordino {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

EmbeddingMatrix synth_embedding(const NoteSequence& seq, std::uint32_t dim, std::uint64_t seed,
                                std::uint64_t rep_tag, const Hand* hand) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < seq.notes.size(); ++i) {
    if (!hand || seq.notes[i].hand == *hand) rows.push_back(i);
  }
  EmbeddingMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    const std::uint64_t prev = i > 0 ? static_cast<std::uint64_t>(seq.notes[i - 1].midi_pitch) : 0;
    const std::uint64_t next =
        i + 1 < seq.notes.size() ? static_cast<std::uint64_t>(seq.notes[i + 1].midi_pitch) : 0;
    std::uint64_t h = hash_combine(seed, rep_tag);
    h = hash_combine(h, prev);
    h = hash_combine(h, static_cast<std::uint64_t>(seq.notes[i].midi_pitch));
    h = hash_combine(h, next);
    for (std::uint32_t j = 0; j < dim; ++j) {
      const std::uint64_t cell = hash_combine(h, j);
      const double unit = static_cast<double>(cell >> 11) * (1.0 / 9007199254740992.0);
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          static_cast<float>(2.0 * unit - 1.0);
    }
  }
  return m;
}

}  // namespace ordino
