// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/score.hpp"

namespace ordino {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class RepName { Pitch, Argnn, Virtuoso, VirtuosoEnc, Fused };

std::string_view rep_name_string(RepName rep);
RepName parse_rep_name(std::string_view text);  // ConfigError on unknown names

constexpr Eigen::Index kVirtuosoDim = 64;

// Note-level features. Rows are notes. Pitch sequences hold one column of token
// indices (midi_pitch - 21). argnn holds two branches (right hand, left hand) whose
// rows interleave back into canonical order through hand_tags.
struct FeatureSequence {
  RepName rep = RepName::Pitch;
  std::vector<Matrix> branches;
  std::vector<Hand> hand_tags;  // canonical-order hand per note; required when branches == 2

  std::size_t length() const;  // notes on the canonical axis
  Eigen::Index width(std::size_t branch = 0) const { return branches.at(branch).cols(); }
};

// Errors: EmptySequence.
FeatureSequence pitch_tokens(const NoteSequence& seq);

// Builds a validated embedding-backed sequence. Errors: ShapeMismatch, NonFiniteValue.
FeatureSequence embedding_sequence(RepName rep, std::vector<Matrix> branches,
                                   std::vector<Hand> hand_tags = {});

// Single-branch matrix in canonical note order (argnn hands interleaved).
Matrix flatten_branches(const FeatureSequence& seq);

// Per-note concatenation of two representations. Errors: LengthMismatch, ShapeMismatch.
FeatureSequence align(const FeatureSequence& a, const FeatureSequence& b);

struct Fragment {
  std::string piece_id;
  std::size_t start_note = 0;
  std::size_t length = 0;
  int label = 1;
};

struct FragmentSpan {
  std::size_t start = 0;
  std::size_t length = 0;
  friend bool operator==(const FragmentSpan&, const FragmentSpan&) = default;
};

// Window starts at multiples of hop = round(window * (1 - overlap)); pieces shorter than
// the window yield one fragment, and a tail window anchored at seq_len - window is added
// when the last full window stops short of the end.
std::vector<FragmentSpan> fragment_spans(std::size_t seq_len, std::size_t window = 256,
                                         double overlap_fraction = 0.25);

std::vector<Fragment> fragment(const std::string& piece_id, int label, std::size_t seq_len,
                               std::size_t window = 256, double overlap_fraction = 0.25);

// Notes [start, start + length) on the canonical axis; argnn branches are cut per hand.
FeatureSequence slice(const FeatureSequence& seq, std::size_t start, std::size_t length);

}  // namespace ordino
