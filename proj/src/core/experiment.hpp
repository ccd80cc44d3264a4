// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/classifier.hpp"
#include "core/ensemble.hpp"
#include "core/manifest.hpp"
#include "core/metrics.hpp"
#include "core/splits.hpp"

namespace ordino {

struct FragmentConfig {
  bool enabled = false;
  std::size_t window = 256;
  double overlap = 0.25;
};

struct ExperimentConfig {
  std::filesystem::path manifest;
  RepName rep = RepName::Pitch;
  HeadKind loss = HeadKind::Nll;
  Fusion fusion = Fusion::None;
  std::vector<RepName> fusion_inputs{RepName::Argnn, RepName::Virtuoso};
  int num_classes = 0;  // 0 = from the manifest (3 under group3_training)
  int fold = 0;
  SplitStrategy split_strategy = SplitStrategy::LengthLevel;
  std::uint64_t seed = 0;
  double lr = 1e-4;
  double clip = 1e-4;
  std::size_t batch_size = 64;
  double dropout = 0.2;
  nn::Index hidden = 64;
  int layers = 2;
  nn::Index pitch_embed_dim = 32;
  int int_heads = 2;
  double alpha = 1.0;
  int patience = 50;
  int max_epochs = 1000;
  FragmentConfig fragment;
  std::optional<std::size_t> length_cap;
  bool group3_training = false;
  bool balanced_sampling = true;
  bool class_weights = true;
  // Halt as soon as training accuracy reaches this value; that epoch is kept.
  std::optional<double> stop_at_train_acc;
  std::filesystem::path out;
  bool single_thread = false;
};

// Unknown keys are rejected. Relative paths resolve against base_dir. Errors: ConfigError.
ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json experiment_to_json(const ExperimentConfig& config);

nlohmann::json classifier_config_to_json(const ClassifierConfig& config);
ClassifierConfig classifier_config_from_json(const nlohmann::json& j);

// A piece with the features one model family needs.
struct PieceData {
  std::string piece_id;
  int label = 1;
  std::size_t n_notes = 0;
  std::map<RepName, FeatureSequence> features;
};

std::set<RepName> required_reps(RepName rep, Fusion fusion, const std::vector<RepName>& fusion_inputs);

// Parses the score and loads the listed representations. Embedding keys are
// "virtuoso", "virtuoso_enc" and "argnn" ([rh, lh]). Errors: ConfigError (missing
// embedding file), LengthMismatch, plus parse and format errors.
PieceData load_piece(const std::string& piece_id, int label, const std::filesystem::path& score,
                     const std::map<std::string, std::vector<std::filesystem::path>>& embeddings,
                     const std::set<RepName>& reps);

// Applies group3 relabelling and the length cap. Returns the effective K.
int prepare_manifest(CorpusManifest& manifest, const ExperimentConfig& config);

ClassifierConfig classifier_config_for(const ExperimentConfig& config, int num_classes,
                                       const std::vector<PieceData>& pieces);

struct FitResult {
  std::unique_ptr<Classifier> model;  // selected epoch
  int best_epoch = 0;
  int epochs_run = 0;
  std::size_t train_units = 0;
  double train_acc_k = 0.0;  // of the selected epoch
  std::string stop_reason;
  std::vector<nlohmann::json> log;
};

// Trains on `train`, early-stopping on `val` (on `train` when val is empty).
FitResult fit(const ExperimentConfig& config, const ClassifierConfig& model_config,
              const std::vector<PieceData>& train, const std::vector<PieceData>& val);

std::vector<PredictionRecord> predict_pieces(const Classifier& model, const std::vector<PieceData>& pieces,
                                             bool single_thread);
MetricsReport score_predictions(const std::vector<PieceData>& pieces,
                                const std::vector<PredictionRecord>& predictions, int num_classes);

// Full run: manifest, split, fit, bundle (model.ckpt, config.json, train_log.jsonl,
// split.json) under config.out. Returns a summary. Errors: ConfigError, DataError.
nlohmann::json train_experiment(const ExperimentConfig& config);

// Runs several folds, each into out/fold<k>, on up to `jobs` threads.
nlohmann::json train_folds(const ExperimentConfig& config, const std::vector<int>& folds, int jobs);

struct Bundle {
  std::filesystem::path dir;
  ExperimentConfig experiment;
  std::unique_ptr<Classifier> model;
};

Bundle load_bundle(const std::filesystem::path& dir);

struct EvalRequest {
  std::optional<std::filesystem::path> manifest;  // default: the bundle's
  std::optional<int> fold;                        // default: the bundle's
  Subset subset = Subset::Test;
  bool single_thread = false;
};

// Deterministic report with metrics and per-piece predictions. Errors: ConfigError
// (K or split definition mismatch), DataError.
nlohmann::json evaluate_bundle(const std::filesystem::path& bundle, const EvalRequest& request);
nlohmann::json ensemble_bundles(const std::vector<std::filesystem::path>& bundles, const EvalRequest& request);

// Prediction for a single score with its top attended notes per branch.
nlohmann::json predict_with_bundle(const Bundle& bundle, const std::filesystem::path& score,
                                   const std::map<std::string, std::vector<std::filesystem::path>>& embeddings,
                                   std::size_t top_notes = 5);
nlohmann::json predict_score(const std::filesystem::path& bundle, const std::filesystem::path& score,
                             const std::map<std::string, std::vector<std::filesystem::path>>& embeddings,
                             std::size_t top_notes = 5);

}  // namespace ordino
