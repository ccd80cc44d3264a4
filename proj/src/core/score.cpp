// SPDX-License-Identifier: Apache-2.0
#include "core/score.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "core/error.hpp"
#include "core/xml.hpp"
#include "core/zip.hpp"

namespace ordino {

namespace {

using xml::Element;

int step_semitone(char step) {
  switch (step) {
    case 'C': return 0;
    case 'D': return 2;
    case 'E': return 4;
    case 'F': return 5;
    case 'G': return 7;
    case 'A': return 9;
    case 'B': return 11;
    default: return -1;
  }
}

long parse_long(const std::string& text, const std::string& what, int line) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError,
         "invalid " + what + " '" + text + "' at line " + std::to_string(line));
  }
}

double parse_double(const std::string& text, const std::string& what, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::ParseError,
         "invalid " + what + " '" + text + "' at line " + std::to_string(line));
  }
}

// Duration values in MusicXML are integers in most files, but decimal values occur.
Rational parse_divisions_value(const Element& el, const std::string& what) {
  const std::string text = el.trimmed_text();
  if (text.find_first_of(".eE") == std::string::npos) {
    return Rational(parse_long(text, what, el.line));
  }
  const double v = parse_double(text, what, el.line);
  return Rational(static_cast<std::int64_t>(std::llround(v * 1024.0)), 1024);
}

struct TieFlags {
  bool start = false;
  bool stop = false;
};

TieFlags tie_flags(const Element& note) {
  TieFlags flags;
  auto collect = [&flags](const std::vector<const Element*>& ties) {
    for (const Element* t : ties) {
      const std::string* type = t->attribute("type");
      if (!type) continue;
      if (*type == "start") flags.start = true;
      if (*type == "stop") flags.stop = true;
    }
  };
  const auto ties = note.children_named("tie");
  if (!ties.empty()) {
    collect(ties);
  } else if (const Element* notations = note.child("notations")) {
    collect(notations->children_named("tied"));
  }
  return flags;
}

std::string locate(const std::string& part_id, const std::string& measure_number,
                   int measure_index, int note_in_measure, int line) {
  std::ostringstream os;
  os << "part '" << part_id << "', measure " << measure_number << " (index " << measure_index
     << "), note " << note_in_measure << ", line " << line;
  return os.str();
}

std::string extract_root_document(std::string bytes) {
  if (!zip::looks_like_zip(bytes)) return bytes;
  zip::Archive archive(std::move(bytes));
  if (auto container = archive.read("META-INF/container.xml")) {
    const auto root = xml::parse(*container);
    if (const Element* rootfiles = root->child("rootfiles")) {
      for (const Element* rf : rootfiles->children_named("rootfile")) {
        if (const std::string* full_path = rf->attribute("full-path")) {
          if (auto doc = archive.read(*full_path)) return *doc;
          fail(ErrorCode::ParseError, "compressed score lacks rootfile '" + *full_path + "'");
        }
      }
    }
  }
  for (const auto& entry : archive.entries()) {
    const bool xml_name = entry.name.ends_with(".xml") || entry.name.ends_with(".musicxml");
    if (xml_name && !entry.name.starts_with("META-INF/")) return archive.read(entry);
  }
  fail(ErrorCode::ParseError, "compressed score contains no MusicXML document");
}

}  // namespace

std::string_view hand_name(Hand hand) { return hand == Hand::Right ? "R" : "L"; }

std::vector<Hand> NoteSequence::hand_tags() const {
  std::vector<Hand> tags;
  tags.reserve(notes.size());
  for (const auto& n : notes) tags.push_back(n.hand);
  return tags;
}

void canonicalize(std::vector<Note>& notes) {
  std::stable_sort(notes.begin(), notes.end(), [](const Note& a, const Note& b) {
    if (a.onset != b.onset) return a.onset < b.onset;
    return a.midi_pitch < b.midi_pitch;
  });
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

NoteSequence parse_musicxml(const std::filesystem::path& path) {
  return parse_musicxml_bytes(read_file_bytes(path), path.stem().string());
}

NoteSequence parse_musicxml_bytes(std::string bytes, std::string piece_id) {
  const auto root = xml::parse(extract_root_document(std::move(bytes)));
  if (root->name == "score-timewise") {
    fail(ErrorCode::UnsupportedScore, "timewise MusicXML is not supported");
  }
  if (root->name != "score-partwise") {
    fail(ErrorCode::ParseError, "root element '" + root->name + "' is not a MusicXML score");
  }

  NoteSequence seq;
  seq.piece_id = std::move(piece_id);
  int staff_offset = 0;

  for (const Element* part : root->children_named("part")) {
    const std::string part_id = part->attribute("id") ? *part->attribute("id") : "?";
    Rational divisions(1);
    int staves = 1;
    Rational measure_start(0);
    Rational last_onset(0);
    // Open tie chains keyed by (global staff, pitch) pointing into seq.notes.
    std::map<std::pair<int, int>, std::size_t> open_ties;
    const auto measures = part->children_named("measure");
    seq.n_measures = std::max(seq.n_measures, static_cast<int>(measures.size()));

    for (int m = 0; m < static_cast<int>(measures.size()); ++m) {
      const Element* measure = measures[static_cast<std::size_t>(m)];
      const std::string number = measure->attribute("number") ? *measure->attribute("number") : "?";
      Rational cursor(0);
      Rational furthest(0);
      int note_in_measure = 0;

      for (const auto& child : measure->children) {
        const Element& el = *child;
        if (el.name == "attributes") {
          if (const Element* d = el.child("divisions")) {
            divisions = parse_divisions_value(*d, "divisions");
            if (divisions <= Rational(0)) {
              fail(ErrorCode::ParseError, "non-positive divisions at line " + std::to_string(d->line));
            }
          }
          if (const Element* s = el.child("staves")) {
            staves = static_cast<int>(parse_long(s->trimmed_text(), "staves", s->line));
          }
        } else if (el.name == "backup" || el.name == "forward") {
          const Element* d = el.child("duration");
          if (!d) fail(ErrorCode::ParseError, el.name + " without duration at line " + std::to_string(el.line));
          const Rational shift = parse_divisions_value(*d, "duration") / divisions;
          cursor = el.name == "backup" ? cursor - shift : cursor + shift;
          if (cursor < Rational(0)) cursor = Rational(0);
          furthest = std::max(furthest, cursor);
        } else if (el.name == "note") {
          ++note_in_measure;
          if (el.has_child("grace")) continue;
          const bool chord = el.has_child("chord");
          const Element* dur_el = el.child("duration");
          if (!dur_el) {
            fail(ErrorCode::ParseError,
                 "note without duration at " +
                     locate(part_id, number, m, note_in_measure, el.line));
          }
          const Rational duration = parse_divisions_value(*dur_el, "duration") / divisions;
          const Rational onset = chord ? last_onset : measure_start + cursor;
          if (!chord) {
            last_onset = onset;
            cursor += duration;
            furthest = std::max(furthest, cursor);
          }

          const Element* pitch = el.child("pitch");
          if (!pitch || el.has_child("rest") || el.has_child("cue")) continue;
          if (duration <= Rational(0)) continue;

          const std::string step = pitch->child_text("step");
          const std::string octave_text = pitch->child_text("octave");
          if (step.size() != 1 || step_semitone(step[0]) < 0 || octave_text.empty()) {
            fail(ErrorCode::ParseError,
                 "invalid pitch at " + locate(part_id, number, m, note_in_measure, el.line));
          }
          const long octave = parse_long(octave_text, "octave", pitch->line);
          double alter = 0.0;
          if (const Element* a = pitch->child("alter")) {
            alter = parse_double(a->trimmed_text(), "alter", a->line);
          }
          const int midi = static_cast<int>((octave + 1) * 12 + step_semitone(step[0]) +
                                            std::lround(alter));
          if (midi < kLowestPianoPitch || midi > kHighestPianoPitch) {
            fail(ErrorCode::OutOfRangePitch,
                 "pitch " + std::to_string(midi) + " outside piano range at " +
                     locate(part_id, number, m, note_in_measure, el.line));
          }

          int local_staff = 1;
          if (const Element* s = el.child("staff")) {
            local_staff = static_cast<int>(parse_long(s->trimmed_text(), "staff", s->line));
          }
          const int global_staff = staff_offset + local_staff;
          const Hand hand = global_staff == 1 ? Hand::Right : Hand::Left;

          const TieFlags tie = tie_flags(el);
          const auto key = std::make_pair(global_staff, midi);
          if (tie.stop) {
            if (auto it = open_ties.find(key); it != open_ties.end()) {
              seq.notes[it->second].duration += duration;
              if (!tie.start) open_ties.erase(it);
              continue;
            }
          }
          Note note;
          note.midi_pitch = midi;
          note.onset = onset;
          note.duration = duration;
          note.hand = hand;
          note.measure_index = m;
          seq.notes.push_back(note);
          if (tie.start) open_ties[key] = seq.notes.size() - 1;
        }
      }
      measure_start += furthest;
    }
    staff_offset += std::max(staves, 1);
  }

  if (seq.notes.empty()) {
    fail(ErrorCode::UnsupportedScore, "score '" + seq.piece_id + "' has no pitched notes");
  }
  canonicalize(seq.notes);
  return seq;
}

}  // namespace ordino
