// SPDX-License-Identifier: Apache-2.0
#include "ordino/ordino.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <sstream>
#include <string>

#include <json.hpp>

#include "core/error.hpp"
#include "core/experiment.hpp"
#include "core/gradcheck_suite.hpp"
#include "core/manifest.hpp"
#include "core/metrics.hpp"
#include "core/pemb.hpp"
#include "core/score.hpp"
#include "core/splits.hpp"
#include "core/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

struct ordino_score {
  ordino::NoteSequence seq;
};

struct ordino_manifest {
  ordino::CorpusManifest manifest;
};

struct ordino_model {
  ordino::Bundle bundle;
};

namespace {

thread_local std::string last_error;

ordino_status status_of(ordino::ErrorCode code) { return static_cast<ordino_status>(static_cast<int>(code)); }

ordino_status set_error(ordino_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename F>
ordino_status guarded(F&& body) {
  last_error.clear();
  try {
    body();
    return ORDINO_OK;
  } catch (const ordino::Error& e) {
    return set_error(status_of(e.code()), e.what());
  } catch (const json::exception& e) {
    return set_error(ORDINO_CONFIG_ERROR, std::string("malformed JSON: ") + e.what());
  } catch (const fs::filesystem_error& e) {
    return set_error(ORDINO_IO_ERROR, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(ORDINO_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(ORDINO_INTERNAL, e.what());
  } catch (...) {
    return set_error(ORDINO_INTERNAL, "unknown failure");
  }
}

void require(const void* p, const char* what) {
  if (!p) ordino::fail(ordino::ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(const json& j, char** out) {
  require(out, "out_json");
  *out = dup_string(j.dump());
}

json parse_optional(const char* text) {
  if (!text || !*text) return json::object();
  return json::parse(text);
}

std::map<std::string, std::vector<fs::path>> embedding_map(const char* text) {
  std::map<std::string, std::vector<fs::path>> out;
  const json j = parse_optional(text);
  if (!j.is_object()) ordino::fail(ordino::ErrorCode::ConfigError, "embeddings must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto& list = out[key];
    if (value.is_string()) {
      list.emplace_back(value.get<std::string>());
    } else {
      for (const auto& v : value) list.emplace_back(v.get<std::string>());
    }
  }
  return out;
}

ordino::EvalRequest eval_request(const char* text) {
  const json j = parse_optional(text);
  ordino::EvalRequest r;
  for (const auto& [key, value] : j.items()) {
    if (key == "manifest") {
      r.manifest = fs::path(value.get<std::string>());
    } else if (key == "fold") {
      r.fold = value.get<int>();
    } else if (key == "subset") {
      r.subset = ordino::parse_subset(value.get<std::string>());
    } else if (key == "single_thread") {
      r.single_thread = value.get<bool>();
    } else {
      ordino::fail(ordino::ErrorCode::ConfigError, "unknown request key '" + key + "'");
    }
  }
  return r;
}

ordino::ExperimentConfig experiment(const char* config_json, const char* base_dir) {
  require(config_json, "config_json");
  return ordino::experiment_from_json(json::parse(config_json), base_dir ? fs::path(base_dir) : fs::current_path());
}

}  // namespace

extern "C" {

const char* ordino_version(void) { return "0.1.0"; }

const char* ordino_status_name(ordino_status status) {
  static thread_local std::string name;
  name = std::string(ordino::error_code_name(static_cast<ordino::ErrorCode>(status)));
  return name.c_str();
}

const char* ordino_last_error(void) { return last_error.c_str(); }

void ordino_string_free(char* text) { std::free(text); }

void ordino_set_warnings(int enabled) { ordino::set_warnings_enabled(enabled != 0); }

// ---- scores

ordino_status ordino_score_parse(const char* path, ordino_score** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto s = std::make_unique<ordino_score>();
    s->seq = ordino::parse_musicxml(path);
    *out = s.release();
  });
}

void ordino_score_free(ordino_score* score) { delete score; }

size_t ordino_score_note_count(const ordino_score* score) { return score ? score->seq.notes.size() : 0; }

int ordino_score_measure_count(const ordino_score* score) { return score ? score->seq.n_measures : 0; }

ordino_status ordino_score_note(const ordino_score* score, size_t index, int* midi_pitch, double* onset,
                                double* duration, int* hand, int* measure) {
  return guarded([&] {
    require(score, "score");
    if (index >= score->seq.notes.size()) ordino::fail(ordino::ErrorCode::InvalidArgument, "note index out of range");
    const auto& n = score->seq.notes[index];
    if (midi_pitch) *midi_pitch = n.midi_pitch;
    if (onset) *onset = n.onset.to_double();
    if (duration) *duration = n.duration.to_double();
    if (hand) *hand = n.hand == ordino::Hand::Right ? 0 : 1;
    if (measure) *measure = n.measure_index;
  });
}

ordino_status ordino_score_to_json(const ordino_score* score, char** out_json) {
  return guarded([&] {
    require(score, "score");
    json notes = json::array();
    for (const auto& n : score->seq.notes) {
      notes.push_back({{"pitch", n.midi_pitch},
                       {"onset", n.onset.to_string()},
                       {"duration", n.duration.to_string()},
                       {"hand", ordino::hand_name(n.hand)},
                       {"measure", n.measure_index}});
    }
    emit({{"piece_id", score->seq.piece_id}, {"n_measures", score->seq.n_measures}, {"notes", notes}}, out_json);
  });
}

// ---- manifests

ordino_status ordino_manifest_build(const char* score_dir, const char* labels_jsonl, int num_classes,
                                    ordino_manifest** out) {
  return guarded([&] {
    require(score_dir, "score_dir");
    require(labels_jsonl, "labels_jsonl");
    require(out, "out");
    *out = nullptr;
    auto m = std::make_unique<ordino_manifest>();
    m->manifest = ordino::build_manifest(score_dir, labels_jsonl, num_classes);
    *out = m.release();
  });
}

ordino_status ordino_manifest_load(const char* path, ordino_manifest** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto m = std::make_unique<ordino_manifest>();
    m->manifest = ordino::load_manifest(path);
    *out = m.release();
  });
}

ordino_status ordino_manifest_save(const ordino_manifest* manifest, const char* path) {
  return guarded([&] {
    require(manifest, "manifest");
    require(path, "path");
    ordino::save_manifest(manifest->manifest, path);
  });
}

void ordino_manifest_free(ordino_manifest* manifest) { delete manifest; }

size_t ordino_manifest_entry_count(const ordino_manifest* manifest) {
  return manifest ? manifest->manifest.entries.size() : 0;
}

size_t ordino_manifest_reject_count(const ordino_manifest* manifest) {
  return manifest ? manifest->manifest.rejects.size() : 0;
}

ordino_status ordino_manifest_rejects_json(const ordino_manifest* manifest, char** out_json) {
  return guarded([&] {
    require(manifest, "manifest");
    json out = json::array();
    for (const auto& r : manifest->manifest.rejects) {
      out.push_back({{"piece_id", r.piece_id},
                     {"score_path", r.score_path.string()},
                     {"code", ordino::error_code_name(r.code)},
                     {"message", r.message}});
    }
    emit(out, out_json);
  });
}

ordino_status ordino_manifest_tau_c(const ordino_manifest* manifest, double* out) {
  return guarded([&] {
    require(manifest, "manifest");
    require(out, "out");
    *out = ordino::corpus_tau_c(manifest->manifest);
  });
}

ordino_status ordino_manifest_splits(const ordino_manifest* manifest, const char* strategy, uint64_t seed,
                                     char** out_json) {
  return guarded([&] {
    require(manifest, "manifest");
    const auto s = ordino::parse_strategy(strategy ? strategy : "length_level");
    json plans = json::array();
    for (const auto& p : ordino::make_splits(manifest->manifest, s, seed)) plans.push_back(ordino::split_to_json(p));
    emit(plans, out_json);
  });
}

// ---- embeddings

ordino_status ordino_embedding_load(const char* path, float** data, uint32_t* rows, uint32_t* cols) {
  return guarded([&] {
    require(path, "path");
    require(data, "data");
    const ordino::EmbeddingMatrix m = ordino::load_embedding(path);
    auto* buffer = static_cast<float*>(std::malloc(sizeof(float) * static_cast<std::size_t>(std::max<Eigen::Index>(1, m.size()))));
    if (!buffer) throw std::bad_alloc();
    std::memcpy(buffer, m.data(), sizeof(float) * static_cast<std::size_t>(m.size()));
    *data = buffer;
    if (rows) *rows = static_cast<uint32_t>(m.rows());
    if (cols) *cols = static_cast<uint32_t>(m.cols());
  });
}

void ordino_embedding_free(float* data) { std::free(data); }

ordino_status ordino_embedding_save(const char* path, const float* data, uint32_t rows, uint32_t cols) {
  return guarded([&] {
    require(path, "path");
    if (rows * static_cast<std::uint64_t>(cols) > 0) require(data, "data");
    ordino::EmbeddingMatrix m(rows, cols);
    if (m.size() > 0) std::memcpy(m.data(), data, sizeof(float) * static_cast<std::size_t>(m.size()));
    ordino::save_embedding(path, m);
  });
}

ordino_status ordino_synth_embed(const char* score_path, const char* out_dir, const char* piece_id, uint32_t dim,
                                 uint64_t seed, const char* reps_csv, char** out_json) {
  return guarded([&] {
    require(score_path, "score_path");
    require(out_dir, "out_dir");
    if (dim < 1) ordino::fail(ordino::ErrorCode::InvalidArgument, "embedding width must be >= 1");
    const ordino::NoteSequence seq = ordino::parse_musicxml(score_path);
    const std::string id = piece_id && *piece_id ? piece_id : fs::path(score_path).stem().string();
    std::set<std::string> reps{"virtuoso", "virtuoso_enc", "argnn"};
    if (reps_csv && *reps_csv) {
      reps.clear();
      std::stringstream ss(reps_csv);
      for (std::string r; std::getline(ss, r, ',');) {
        if (r != "virtuoso" && r != "virtuoso_enc" && r != "argnn") {
          ordino::fail(ordino::ErrorCode::ConfigError, "synth-embed cannot produce '" + r + "'");
        }
        reps.insert(r);
      }
    }
    fs::create_directories(out_dir);
    json written = json::object();
    auto tag = [](const std::string& r) {
      std::uint64_t h = 0;
      for (char c : r) h = ordino::hash_combine(h, static_cast<unsigned char>(c));
      return h;
    };
    for (const auto& r : reps) {
      if (r == "argnn") {
        json pair = json::array();
        for (ordino::Hand hand : {ordino::Hand::Right, ordino::Hand::Left}) {
          const fs::path p = fs::path(out_dir) / (id + ".argnn." + (hand == ordino::Hand::Right ? "rh" : "lh") + ".pemb");
          ordino::save_embedding(p, ordino::synth_embedding(seq, dim, seed, tag(r), &hand));
          pair.push_back(p.string());
        }
        written[r] = pair;
      } else {
        const auto width = r == "virtuoso" ? static_cast<std::uint32_t>(ordino::kVirtuosoDim) : dim;
        const fs::path p = fs::path(out_dir) / (id + "." + r + ".pemb");
        ordino::save_embedding(p, ordino::synth_embedding(seq, width, seed, tag(r)));
        written[r] = p.string();
      }
    }
    if (out_json) emit({{"piece_id", id}, {"n_notes", seq.notes.size()}, {"files", written}}, out_json);
  });
}

// ---- models and commands

ordino_status ordino_model_load(const char* bundle_dir, ordino_model** out) {
  return guarded([&] {
    require(bundle_dir, "bundle_dir");
    require(out, "out");
    *out = nullptr;
    auto m = std::make_unique<ordino_model>();
    m->bundle = ordino::load_bundle(bundle_dir);
    *out = m.release();
  });
}

void ordino_model_free(ordino_model* model) { delete model; }

int ordino_model_num_classes(const ordino_model* model) {
  return model ? model->bundle.model->config().num_classes : 0;
}

ordino_status ordino_model_predict(const ordino_model* model, const char* score_path, const char* embeddings_json,
                                   char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(score_path, "score_path");
    emit(ordino::predict_with_bundle(model->bundle, score_path, embedding_map(embeddings_json)), out_json);
  });
}

ordino_status ordino_train(const char* config_json, const char* base_dir, char** out_json) {
  return guarded([&] {
    const json summary = ordino::train_experiment(experiment(config_json, base_dir));
    if (out_json) emit(summary, out_json);
  });
}

ordino_status ordino_train_folds(const char* config_json, const char* base_dir, const int* folds, size_t count,
                                 int jobs, char** out_json) {
  return guarded([&] {
    require(folds, "folds");
    const json summary = ordino::train_folds(experiment(config_json, base_dir),
                                             std::vector<int>(folds, folds + count), jobs);
    if (out_json) emit(summary, out_json);
  });
}

ordino_status ordino_evaluate(const char* bundle_dir, const char* request_json, char** out_json) {
  return guarded([&] {
    require(bundle_dir, "bundle_dir");
    emit(ordino::evaluate_bundle(bundle_dir, eval_request(request_json)), out_json);
  });
}

ordino_status ordino_ensemble(const char* const* bundle_dirs, size_t count, const char* request_json,
                              char** out_json) {
  return guarded([&] {
    require(bundle_dirs, "bundle_dirs");
    std::vector<fs::path> dirs;
    for (size_t i = 0; i < count; ++i) {
      require(bundle_dirs[i], "bundle path");
      dirs.emplace_back(bundle_dirs[i]);
    }
    emit(ordino::ensemble_bundles(dirs, eval_request(request_json)), out_json);
  });
}

ordino_status ordino_predict(const char* bundle_dir, const char* score_path, const char* embeddings_json,
                             char** out_json) {
  return guarded([&] {
    require(bundle_dir, "bundle_dir");
    require(score_path, "score_path");
    emit(ordino::predict_score(bundle_dir, score_path, embedding_map(embeddings_json)), out_json);
  });
}

ordino_status ordino_gradcheck(const char* options_json, char** out_json, int* all_passed) {
  return guarded([&] {
    const json j = parse_optional(options_json);
    ordino::GradCheckSuiteOptions opts;
    for (const auto& [key, value] : j.items()) {
      if (key == "filter") {
        opts.filter = value.get<std::string>();
      } else if (key == "max_length") {
        opts.max_length = value.get<std::size_t>();
      } else if (key == "hidden") {
        opts.hidden = value.get<Eigen::Index>();
      } else if (key == "seed") {
        opts.seed = value.get<std::uint64_t>();
      } else if (key == "tolerance") {
        opts.check.tolerance = value.get<double>();
      } else {
        ordino::fail(ordino::ErrorCode::ConfigError, "unknown gradcheck option '" + key + "'");
      }
    }
    const auto cases = ordino::run_gradcheck_suite(opts);
    bool ok = !cases.empty();
    double worst = 0.0;
    for (const auto& c : cases) {
      ok = ok && c.report.passed() && c.report.max_rel_error <= opts.check.tolerance;
      worst = std::max(worst, c.report.max_rel_error);
    }
    if (all_passed) *all_passed = ok ? 1 : 0;
    emit({{"cases", ordino::gradcheck_to_json(cases, opts.check.tolerance)},
          {"tolerance", opts.check.tolerance},
          {"max_rel_error", worst},
          {"passed", ok}},
         out_json);
  });
}

// ---- statistics

ordino_status ordino_metrics(const int* truth, const int* preds, size_t count, int num_classes, char** out_json) {
  return guarded([&] {
    require(truth, "truth");
    require(preds, "preds");
    std::vector<ordino::Prediction> p(count);
    for (size_t i = 0; i < count; ++i) {
      if (preds[i] != 0) p[i] = preds[i];
    }
    emit(ordino::metrics_to_json(ordino::compute_metrics(std::span<const int>(truth, count), p, num_classes)), out_json);
  });
}

ordino_status ordino_tau_c(const long* x, const long* y, size_t count, double* out) {
  return guarded([&] {
    require(x, "x");
    require(y, "y");
    require(out, "out");
    *out = ordino::stuart_tau_c(std::span<const long>(x, count), std::span<const long>(y, count));
  });
}

}  // extern "C"
