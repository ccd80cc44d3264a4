// SPDX-License-Identifier: Apache-2.0
#include "core/features.hpp"

#include <cmath>

#include "core/error.hpp"

namespace ordino {

std::string_view rep_name_string(RepName rep) {
  switch (rep) {
    case RepName::Pitch: return "pitch";
    case RepName::Argnn: return "argnn";
    case RepName::Virtuoso: return "virtuoso";
    case RepName::VirtuosoEnc: return "virtuoso_enc";
    case RepName::Fused: return "fused";
  }
  return "?";
}

RepName parse_rep_name(std::string_view text) {
  for (RepName r : {RepName::Pitch, RepName::Argnn, RepName::Virtuoso, RepName::VirtuosoEnc,
                    RepName::Fused}) {
    if (rep_name_string(r) == text) return r;
  }
  fail(ErrorCode::ConfigError, "unknown representation '" + std::string(text) + "'");
}

std::size_t FeatureSequence::length() const {
  if (branches.size() == 2) return hand_tags.size();
  return branches.empty() ? 0 : static_cast<std::size_t>(branches.front().rows());
}

FeatureSequence pitch_tokens(const NoteSequence& seq) {
  if (seq.notes.empty()) fail(ErrorCode::EmptySequence, "note sequence is empty");
  FeatureSequence out;
  out.rep = RepName::Pitch;
  Matrix tokens(static_cast<Eigen::Index>(seq.notes.size()), 1);
  for (std::size_t i = 0; i < seq.notes.size(); ++i) {
    tokens(static_cast<Eigen::Index>(i), 0) = seq.notes[i].midi_pitch - kLowestPianoPitch;
  }
  out.branches.push_back(std::move(tokens));
  out.hand_tags = seq.hand_tags();
  return out;
}

FeatureSequence embedding_sequence(RepName rep, std::vector<Matrix> branches,
                                   std::vector<Hand> hand_tags) {
  if (rep == RepName::Pitch || rep == RepName::Fused) {
    fail(ErrorCode::InvalidArgument, "embedding_sequence needs an embedding representation");
  }
  const std::size_t expected = rep == RepName::Argnn ? 2 : 1;
  if (branches.size() != expected) {
    fail(ErrorCode::ShapeMismatch, std::string(rep_name_string(rep)) + " expects " +
                                       std::to_string(expected) + " branch(es)");
  }
  for (const auto& b : branches) {
    if (!b.allFinite()) fail(ErrorCode::NonFiniteValue, "embedding contains non-finite values");
  }
  if (rep == RepName::Virtuoso && branches.front().cols() != kVirtuosoDim) {
    fail(ErrorCode::ShapeMismatch, "virtuoso embeddings must have 64 columns, got " +
                                       std::to_string(branches.front().cols()));
  }
  if (rep == RepName::Argnn) {
    std::size_t right = 0;
    for (Hand h : hand_tags) right += h == Hand::Right ? 1 : 0;
    const std::size_t left = hand_tags.size() - right;
    if (static_cast<std::size_t>(branches[0].rows()) != right ||
        static_cast<std::size_t>(branches[1].rows()) != left) {
      fail(ErrorCode::LengthMismatch,
           "argnn rows (" + std::to_string(branches[0].rows()) + " R, " +
               std::to_string(branches[1].rows()) + " L) do not match the score's hands (" +
               std::to_string(right) + " R, " + std::to_string(left) + " L)");
    }
  }
  FeatureSequence out;
  out.rep = rep;
  out.branches = std::move(branches);
  out.hand_tags = std::move(hand_tags);
  return out;
}

Matrix flatten_branches(const FeatureSequence& seq) {
  if (seq.branches.size() == 1) return seq.branches.front();
  if (seq.branches.size() != 2) fail(ErrorCode::ShapeMismatch, "sequence has no branches");
  const Matrix& right = seq.branches[0];
  const Matrix& left = seq.branches[1];
  if (right.cols() != left.cols() && right.rows() > 0 && left.rows() > 0) {
    fail(ErrorCode::ShapeMismatch, "hand branches differ in width; cannot interleave");
  }
  const Eigen::Index width = right.rows() > 0 ? right.cols() : left.cols();
  Matrix out(static_cast<Eigen::Index>(seq.hand_tags.size()), width);
  Eigen::Index r = 0;
  Eigen::Index l = 0;
  for (std::size_t t = 0; t < seq.hand_tags.size(); ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    if (seq.hand_tags[t] == Hand::Right) {
      if (r >= right.rows()) fail(ErrorCode::LengthMismatch, "hand tags exceed right-hand rows");
      out.row(row) = right.row(r++);
    } else {
      if (l >= left.rows()) fail(ErrorCode::LengthMismatch, "hand tags exceed left-hand rows");
      out.row(row) = left.row(l++);
    }
  }
  if (r != right.rows() || l != left.rows()) {
    fail(ErrorCode::LengthMismatch, "hand tags do not cover every branch row");
  }
  return out;
}

FeatureSequence align(const FeatureSequence& a, const FeatureSequence& b) {
  const Matrix fa = flatten_branches(a);
  const Matrix fb = flatten_branches(b);
  if (fa.rows() != fb.rows()) {
    fail(ErrorCode::LengthMismatch, "cannot align sequences of length " +
                                        std::to_string(fa.rows()) + " and " +
                                        std::to_string(fb.rows()));
  }
  FeatureSequence out;
  out.rep = RepName::Fused;
  Matrix joined(fa.rows(), fa.cols() + fb.cols());
  joined << fa, fb;
  out.branches.push_back(std::move(joined));
  out.hand_tags = !a.hand_tags.empty() ? a.hand_tags : b.hand_tags;
  return out;
}

std::vector<FragmentSpan> fragment_spans(std::size_t seq_len, std::size_t window,
                                         double overlap_fraction) {
  if (window < 1) fail(ErrorCode::InvalidArgument, "fragment window must be >= 1");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    fail(ErrorCode::InvalidArgument, "overlap fraction must lie in [0, 1)");
  }
  std::vector<FragmentSpan> spans;
  if (seq_len == 0) return spans;
  if (seq_len < window) {
    spans.push_back({0, seq_len});
    return spans;
  }
  const auto hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(window) * (1.0 - overlap_fraction))));
  std::size_t start = 0;
  for (; start + window <= seq_len; start += hop) spans.push_back({start, window});
  const std::size_t covered = spans.back().start + window;
  if (covered < seq_len) spans.push_back({seq_len - window, window});
  return spans;
}

std::vector<Fragment> fragment(const std::string& piece_id, int label, std::size_t seq_len,
                               std::size_t window, double overlap_fraction) {
  std::vector<Fragment> out;
  for (const auto& s : fragment_spans(seq_len, window, overlap_fraction)) {
    out.push_back({piece_id, s.start, s.length, label});
  }
  return out;
}

FeatureSequence slice(const FeatureSequence& seq, std::size_t start, std::size_t length) {
  const std::size_t total = seq.length();
  if (start + length > total) {
    fail(ErrorCode::InvalidArgument, "slice [" + std::to_string(start) + ", " +
                                         std::to_string(start + length) + ") exceeds " +
                                         std::to_string(total) + " notes");
  }
  FeatureSequence out;
  out.rep = seq.rep;
  if (!seq.hand_tags.empty()) {
    out.hand_tags.assign(seq.hand_tags.begin() + static_cast<std::ptrdiff_t>(start),
                         seq.hand_tags.begin() + static_cast<std::ptrdiff_t>(start + length));
  }
  if (seq.branches.size() == 2) {
    Eigen::Index r0 = 0;
    Eigen::Index l0 = 0;
    for (std::size_t t = 0; t < start; ++t) (seq.hand_tags[t] == Hand::Right ? r0 : l0)++;
    Eigen::Index rn = 0;
    Eigen::Index ln = 0;
    for (Hand h : out.hand_tags) (h == Hand::Right ? rn : ln)++;
    out.branches.push_back(seq.branches[0].middleRows(r0, rn));
    out.branches.push_back(seq.branches[1].middleRows(l0, ln));
  } else {
    for (const auto& b : seq.branches) {
      out.branches.push_back(
          b.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(length)));
    }
  }
  return out;
}

}  // namespace ordino
