// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace ordino {

struct ManifestEntry {
  std::string piece_id;
  std::filesystem::path score_path;
  int label = 1;
  std::string composer;
  std::size_t n_notes = 0;
  // Representation name -> file(s). Single-branch reps carry one path; argnn carries [rh, lh].
  std::map<std::string, std::vector<std::filesystem::path>> embedding_paths;
};

struct RejectRecord {
  std::string piece_id;
  std::filesystem::path score_path;
  ErrorCode code = ErrorCode::ParseError;
  std::string message;
};

struct CorpusManifest {
  int num_classes = 9;
  std::vector<ManifestEntry> entries;
  std::vector<RejectRecord> rejects;

  const ManifestEntry* find(const std::string& piece_id) const;
};

// Labels file: JSON Lines, one {"piece_id", "label", "composer"?, "score"?, "embeddings"?} per line.
// Each piece_id must resolve to exactly one score in score_dir (by stem) unless "score" is given.
// Parse failures become RejectRecords. Errors: LabelMismatch, LabelOutOfRange, IoError, ParseError.
CorpusManifest build_manifest(const std::filesystem::path& score_dir,
                              const std::filesystem::path& labels_file, int num_classes);

// Writes the manifest as JSON Lines plus a sibling "<stem>.rejects.jsonl".
// Paths are stored relative to the manifest's directory.
void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);
CorpusManifest load_manifest(const std::filesystem::path& path);

std::filesystem::path rejects_path_for(const std::filesystem::path& manifest_path);

// Stuart's tau-c between two ordinal variables, from their full contingency table.
// Errors: InsufficientData (fewer than 2 observations, or a constant variable).
double stuart_tau_c(std::span<const long> x, std::span<const long> y);

// tau-c between n_notes and label over the manifest entries.
double corpus_tau_c(const CorpusManifest& manifest);

}  // namespace ordino
