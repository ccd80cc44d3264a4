// SPDX-License-Identifier: Apache-2.0
#include "core/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

#include "core/score.hpp"

namespace ordino {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "ordino-manifest";
constexpr int kManifestVersion = 1;

bool is_score_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".xml" || ext == ".musicxml" || ext == ".mxl";
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::vector<json> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      fail(ErrorCode::ParseError,
           path.string() + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
  }
  return rows;
}

fs::path store_relative(const fs::path& p, const fs::path& base) {
  const fs::path abs = fs::absolute(p).lexically_normal();
  const fs::path rel = abs.lexically_relative(fs::absolute(base).lexically_normal());
  return rel.empty() ? abs : rel;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

void discover_embeddings(ManifestEntry& entry, const fs::path& dir) {
  for (const char* rep : {"virtuoso", "virtuoso_enc"}) {
    const fs::path p = dir / (entry.piece_id + "." + rep + ".pemb");
    if (fs::exists(p)) entry.embedding_paths[rep] = {p};
  }
  const fs::path rh = dir / (entry.piece_id + ".argnn.rh.pemb");
  const fs::path lh = dir / (entry.piece_id + ".argnn.lh.pemb");
  if (fs::exists(rh) && fs::exists(lh)) entry.embedding_paths["argnn"] = {rh, lh};
}

}  // namespace

const ManifestEntry* CorpusManifest::find(const std::string& piece_id) const {
  for (const auto& e : entries) {
    if (e.piece_id == piece_id) return &e;
  }
  return nullptr;
}

fs::path rejects_path_for(const fs::path& manifest_path) {
  fs::path p = manifest_path;
  p.replace_extension(".rejects.jsonl");
  return p;
}

CorpusManifest build_manifest(const fs::path& score_dir, const fs::path& labels_file,
                              int num_classes) {
  if (num_classes < 2) fail(ErrorCode::ConfigError, "number of classes must be >= 2");
  if (!fs::is_directory(score_dir)) {
    fail(ErrorCode::IoError, "score directory '" + score_dir.string() + "' does not exist");
  }
  std::map<std::string, std::vector<fs::path>> by_stem;
  for (const auto& item : fs::directory_iterator(score_dir)) {
    if (item.is_regular_file() && is_score_file(item.path())) {
      by_stem[item.path().stem().string()].push_back(item.path());
    }
  }

  CorpusManifest manifest;
  manifest.num_classes = num_classes;
  std::set<std::string> seen;
  for (const json& row : read_jsonl(labels_file)) {
    if (!row.is_object() || !row.contains("piece_id") || !row.contains("label")) {
      fail(ErrorCode::ParseError, "label record lacks piece_id/label: " + row.dump());
    }
    ManifestEntry entry;
    entry.piece_id = row.at("piece_id").get<std::string>();
    entry.label = row.at("label").get<int>();
    entry.composer = row.value("composer", std::string{});
    if (!seen.insert(entry.piece_id).second) {
      fail(ErrorCode::LabelMismatch, "duplicate label for piece '" + entry.piece_id + "'");
    }
    if (entry.label < 1 || entry.label > num_classes) {
      fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(entry.label) + " of piece '" +
                                           entry.piece_id + "' outside 1.." +
                                           std::to_string(num_classes));
    }
    if (row.contains("score")) {
      entry.score_path = resolve(row.at("score").get<std::string>(), score_dir);
      if (!fs::exists(entry.score_path)) {
        fail(ErrorCode::LabelMismatch, "label for '" + entry.piece_id +
                                           "' references missing score '" +
                                           entry.score_path.string() + "'");
      }
    } else {
      const auto it = by_stem.find(entry.piece_id);
      if (it == by_stem.end()) {
        fail(ErrorCode::LabelMismatch,
             "label references missing score for piece '" + entry.piece_id + "'");
      }
      if (it->second.size() > 1) {
        fail(ErrorCode::LabelMismatch,
             "piece '" + entry.piece_id + "' matches more than one score file");
      }
      entry.score_path = it->second.front();
    }

    discover_embeddings(entry, score_dir);
    if (row.contains("embeddings")) {
      for (const auto& [rep, paths] : row.at("embeddings").items()) {
        std::vector<fs::path> resolved;
        if (paths.is_string()) {
          resolved.push_back(resolve(paths.get<std::string>(), score_dir));
        } else {
          for (const auto& p : paths) resolved.push_back(resolve(p.get<std::string>(), score_dir));
        }
        entry.embedding_paths[rep] = std::move(resolved);
      }
    }

    try {
      entry.n_notes = parse_musicxml(entry.score_path).notes.size();
      manifest.entries.push_back(std::move(entry));
    } catch (const Error& e) {
      manifest.rejects.push_back({entry.piece_id, entry.score_path, e.code(), e.what()});
    }
  }
  return manifest;
}

void save_manifest(const CorpusManifest& manifest, const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << json{{"format", kManifestFormat},
              {"version", kManifestVersion},
              {"num_classes", manifest.num_classes}}
             .dump()
      << '\n';
  for (const auto& e : manifest.entries) {
    json emb = json::object();
    for (const auto& [rep, paths] : e.embedding_paths) {
      json list = json::array();
      for (const auto& p : paths) list.push_back(store_relative(p, base).generic_string());
      emb[rep] = std::move(list);
    }
    out << json{{"piece_id", e.piece_id},
                {"score_path", store_relative(e.score_path, base).generic_string()},
                {"label", e.label},
                {"composer", e.composer},
                {"n_notes", e.n_notes},
                {"embeddings", std::move(emb)}}
               .dump()
        << '\n';
  }

  std::ofstream rej(rejects_path_for(path), std::ios::binary);
  if (!rej) fail(ErrorCode::IoError, "cannot write rejects file for '" + path.string() + "'");
  for (const auto& r : manifest.rejects) {
    rej << json{{"piece_id", r.piece_id},
                {"score_path", store_relative(r.score_path, base).generic_string()},
                {"error", std::string(error_code_name(r.code))},
                {"message", r.message}}
               .dump()
        << '\n';
  }
}

CorpusManifest load_manifest(const fs::path& path) {
  const fs::path base = fs::absolute(path).parent_path();
  const auto rows = read_jsonl(path);
  if (rows.empty() || rows.front().value("format", std::string{}) != kManifestFormat) {
    fail(ErrorCode::FormatError, "'" + path.string() + "' is not an ordino manifest");
  }
  if (rows.front().value("version", 0) != kManifestVersion) {
    fail(ErrorCode::FormatError, "unsupported manifest version in '" + path.string() + "'");
  }
  CorpusManifest manifest;
  manifest.num_classes = rows.front().at("num_classes").get<int>();
  std::set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const json& row = rows[i];
    ManifestEntry e;
    try {
      e.piece_id = row.at("piece_id").get<std::string>();
      e.score_path = resolve(row.at("score_path").get<std::string>(), base);
      e.label = row.at("label").get<int>();
      e.composer = row.value("composer", std::string{});
      e.n_notes = row.at("n_notes").get<std::size_t>();
      if (row.contains("embeddings")) {
        for (const auto& [rep, paths] : row.at("embeddings").items()) {
          auto& list = e.embedding_paths[rep];
          for (const auto& p : paths) list.push_back(resolve(p.get<std::string>(), base));
        }
      }
    } catch (const json::exception& ex) {
      fail(ErrorCode::FormatError, "bad manifest record " + std::to_string(i) + ": " + ex.what());
    }
    if (!seen.insert(e.piece_id).second) {
      fail(ErrorCode::FormatError, "duplicate piece_id '" + e.piece_id + "' in manifest");
    }
    if (e.label < 1 || e.label > manifest.num_classes) {
      fail(ErrorCode::LabelOutOfRange, "manifest label out of range for '" + e.piece_id + "'");
    }
    manifest.entries.push_back(std::move(e));
  }
  const fs::path rejects = rejects_path_for(path);
  if (fs::exists(rejects)) {
    for (const json& row : read_jsonl(rejects)) {
      RejectRecord r;
      r.piece_id = row.value("piece_id", std::string{});
      r.score_path = resolve(row.value("score_path", std::string{}), base);
      r.message = row.value("message", std::string{});
      const std::string code = row.value("error", std::string{});
      for (int c = 0; c <= static_cast<int>(ErrorCode::Internal); ++c) {
        if (error_code_name(static_cast<ErrorCode>(c)) == code) r.code = static_cast<ErrorCode>(c);
      }
      manifest.rejects.push_back(std::move(r));
    }
  }
  return manifest;
}

double stuart_tau_c(std::span<const long> x, std::span<const long> y) {
  if (x.size() != y.size()) fail(ErrorCode::InvalidArgument, "tau-c inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) fail(ErrorCode::InsufficientData, "tau-c needs at least 2 observations");

  std::vector<long> xs(x.begin(), x.end());
  std::vector<long> ys(y.begin(), y.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  const std::size_t rows = xs.size();
  const std::size_t cols = ys.size();
  const std::size_t m = std::min(rows, cols);
  if (m < 2) fail(ErrorCode::InsufficientData, "tau-c undefined when a variable is constant");

  // table[i][j] = count of (x = xs[i], y = ys[j])
  std::vector<double> table(rows * cols, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), x[k]) - xs.begin());
    const auto j = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), y[k]) - ys.begin());
    table[i * cols + j] += 1.0;
  }
  // below[i][j] = sum of table[i'][j'] with i' > i and j' > j; above_left the j' < j variant.
  std::vector<double> lower_right((rows + 1) * (cols + 2), 0.0);
  std::vector<double> lower_left((rows + 1) * (cols + 2), 0.0);
  auto lr = [&](std::size_t i, std::size_t j) -> double& { return lower_right[i * (cols + 2) + j]; };
  auto ll = [&](std::size_t i, std::size_t j) -> double& { return lower_left[i * (cols + 2) + j]; };
  // lr(i, j): cells with row >= i and col >= j (1-shifted indices via padding).
  for (std::size_t i = rows; i-- > 0;) {
    for (std::size_t j = cols; j-- > 0;) {
      lr(i, j) = table[i * cols + j] + lr(i + 1, j) + lr(i, j + 1) - lr(i + 1, j + 1);
    }
  }
  // ll(i, j + 1): cells with row >= i and col <= j.
  for (std::size_t i = rows; i-- > 0;) {
    for (std::size_t j = 0; j < cols; ++j) {
      ll(i, j + 1) = table[i * cols + j] + ll(i + 1, j + 1) + ll(i, j) - ll(i + 1, j);
    }
  }
  double concordant = 0.0;
  double discordant = 0.0;
  for (std::size_t i = 0; i + 1 < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double c = table[i * cols + j];
      if (c == 0.0) continue;
      concordant += c * lr(i + 1, j + 1);
      discordant += c * ll(i + 1, j);
    }
  }
  const double nn = static_cast<double>(n);
  const double md = static_cast<double>(m);
  return 2.0 * md * (concordant - discordant) / (nn * nn * (md - 1.0));
}

double corpus_tau_c(const CorpusManifest& manifest) {
  std::vector<long> lengths;
  std::vector<long> labels;
  for (const auto& e : manifest.entries) {
    lengths.push_back(static_cast<long>(e.n_notes));
    labels.push_back(e.label);
  }
  return stuart_tau_c(lengths, labels);
}

}  // namespace ordino
