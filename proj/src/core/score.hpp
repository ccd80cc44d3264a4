// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "core/rational.hpp"

namespace ordino {

enum class Hand { Right, Left };

std::string_view hand_name(Hand hand);

constexpr int kLowestPianoPitch = 21;
constexpr int kHighestPianoPitch = 108;
constexpr int kPianoKeys = kHighestPianoPitch - kLowestPianoPitch + 1;

struct Note {
  int midi_pitch = 60;
  Rational onset;     // quarter-note beats from the start of the piece
  Rational duration;  // quarter-note beats, > 0
  Hand hand = Hand::Right;
  int measure_index = 0;
};

struct NoteSequence {
  std::string piece_id;
  std::vector<Note> notes;  // canonical order: (onset, pitch), document order on ties
  int n_measures = 0;

  std::vector<Hand> hand_tags() const;
};

// Parses plain (.xml/.musicxml) or compressed (.mxl) partwise MusicXML.
// Errors: ParseError, UnsupportedScore, OutOfRangePitch, IoError.
NoteSequence parse_musicxml(const std::filesystem::path& path);

// Same, from an in-memory document; piece_id is supplied by the caller.
NoteSequence parse_musicxml_bytes(std::string bytes, std::string piece_id);

// Stable sort into (onset, pitch) order.
void canonicalize(std::vector<Note>& notes);

std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace ordino
