// SPDX-License-Identifier: Apache-2.0
#include "core/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>

#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/nn/adam.hpp"
#include "core/pemb.hpp"
#include "core/sampler.hpp"
#include "core/score.hpp"
#include "core/synth.hpp"

namespace ordino {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitTag = 0x1A17;
constexpr std::uint64_t kSamplerTag = 0x5A3E;
constexpr std::uint64_t kDropoutTag = 0xD209;

template <typename T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::ConfigError, std::string("config key '") + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

void validate(const ExperimentConfig& c) {
  if (!(c.lr > 0)) fail(ErrorCode::ConfigError, "lr must be positive");
  if (c.batch_size < 1) fail(ErrorCode::ConfigError, "batch_size must be >= 1");
  if (!(c.dropout >= 0 && c.dropout < 1)) fail(ErrorCode::ConfigError, "dropout must lie in [0, 1)");
  if (c.hidden < 1 || c.layers < 1) fail(ErrorCode::ConfigError, "hidden and layers must be >= 1");
  if (c.patience < 1 || c.max_epochs < 1) fail(ErrorCode::ConfigError, "patience and max_epochs must be >= 1");
  if (c.num_classes != 0 && c.num_classes < 2) fail(ErrorCode::ConfigError, "K must be >= 2");
  if (c.fold < 0 || c.fold >= kFolds) fail(ErrorCode::ConfigError, "fold must lie in 0..4");
  if (c.fragment.enabled && (c.fragment.window < 1 || !(c.fragment.overlap >= 0 && c.fragment.overlap < 1))) {
    fail(ErrorCode::ConfigError, "fragment window must be >= 1 and overlap in [0, 1)");
  }
  if ((c.rep == RepName::Fused) != (c.fusion != Fusion::None)) {
    fail(ErrorCode::ConfigError, "fusion must be set exactly when rep is fused");
  }
}

std::vector<std::string> rep_list(const std::vector<RepName>& reps) {
  std::vector<std::string> out;
  for (RepName r : reps) out.emplace_back(rep_name_string(r));
  return out;
}

void parallel_for(std::size_t n, bool single_thread, const std::function<void(std::size_t)>& body) {
  const unsigned hw = std::max(1U, std::thread::hardware_concurrency());
  const std::size_t workers = single_thread ? 1 : std::min<std::size_t>(hw, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

nn::Matrix to_double(const EmbeddingMatrix& m) { return m.cast<double>(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << text;
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file_bytes(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::FormatError, "malformed JSON in '" + path.string() + "': " + e.what());
  }
}

json prediction_json(const PredictionRecord& p, std::optional<int> truth) {
  json j{{"piece_id", p.piece_id},
         {"prediction", p.label ? json(*p.label) : json(nullptr)},
         {"distribution", std::vector<double>(p.distribution.data(), p.distribution.data() + p.distribution.size())}};
  if (truth) j["label"] = *truth;
  return j;
}

std::vector<PieceData> load_subset(const CorpusManifest& manifest, const SplitPlan& plan, Subset subset,
                                   const std::set<RepName>& reps, bool single_thread) {
  std::vector<const ManifestEntry*> entries;
  for (const auto& e : manifest.entries) {
    auto it = plan.assignment.find(e.piece_id);
    if (it != plan.assignment.end() && it->second == subset) entries.push_back(&e);
  }
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry* a, const ManifestEntry* b) { return a->piece_id < b->piece_id; });
  std::vector<PieceData> out(entries.size());
  parallel_for(entries.size(), single_thread, [&](std::size_t i) {
    const auto& e = *entries[i];
    try {
      out[i] = load_piece(e.piece_id, e.label, e.score_path, e.embedding_paths, reps);
    } catch (const Error& err) {
      if (err.code() == ErrorCode::ConfigError || err.code() == ErrorCode::DataError) throw;
      fail(ErrorCode::DataError, "piece '" + e.piece_id + "': " + err.what());
    }
  });
  return out;
}

struct PreparedSplit {
  CorpusManifest manifest;
  int num_classes = 0;
  SplitPlan plan;
};

PreparedSplit prepare_split(const fs::path& manifest_path, const ExperimentConfig& cfg, int fold) {
  PreparedSplit p;
  p.manifest = load_manifest(manifest_path);
  p.num_classes = prepare_manifest(p.manifest, cfg);
  p.plan = make_split(p.manifest, cfg.split_strategy, cfg.seed, fold);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig experiment_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) fail(ErrorCode::ConfigError, "experiment config must be a JSON object");
  static const std::set<std::string> known{
      "manifest",   "rep",        "loss",          "fusion",          "fusion_inputs",
      "K",          "fold",       "split_strategy", "seed",           "lr",
      "clip",       "batch_size", "dropout",       "hidden",          "layers",
      "pitch_embed_dim", "int_heads", "alpha",     "patience",        "max_epochs",
      "fragment",   "length_cap", "group3_training", "balanced_sampling", "class_weights",
      "stop_at_train_acc", "out", "single_thread"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) fail(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  if (j.contains("manifest")) c.manifest = resolve(get_as<std::string>(j, "manifest"), base_dir);
  if (j.contains("rep")) c.rep = parse_rep_name(get_as<std::string>(j, "rep"));
  if (j.contains("loss")) c.loss = parse_head_kind(get_as<std::string>(j, "loss"));
  if (j.contains("fusion")) c.fusion = parse_fusion(get_as<std::string>(j, "fusion"));
  if (j.contains("fusion_inputs")) {
    c.fusion_inputs.clear();
    for (const auto& r : get_as<std::vector<std::string>>(j, "fusion_inputs")) c.fusion_inputs.push_back(parse_rep_name(r));
  }
  if (j.contains("K")) c.num_classes = get_as<int>(j, "K");
  if (j.contains("fold")) c.fold = get_as<int>(j, "fold");
  if (j.contains("split_strategy")) c.split_strategy = parse_strategy(get_as<std::string>(j, "split_strategy"));
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed");
  if (j.contains("lr")) c.lr = get_as<double>(j, "lr");
  if (j.contains("clip")) c.clip = get_as<double>(j, "clip");
  if (j.contains("batch_size")) c.batch_size = get_as<std::size_t>(j, "batch_size");
  if (j.contains("dropout")) c.dropout = get_as<double>(j, "dropout");
  if (j.contains("hidden")) c.hidden = get_as<nn::Index>(j, "hidden");
  if (j.contains("layers")) c.layers = get_as<int>(j, "layers");
  if (j.contains("pitch_embed_dim")) c.pitch_embed_dim = get_as<nn::Index>(j, "pitch_embed_dim");
  if (j.contains("int_heads")) c.int_heads = get_as<int>(j, "int_heads");
  if (j.contains("alpha")) c.alpha = get_as<double>(j, "alpha");
  if (j.contains("patience")) c.patience = get_as<int>(j, "patience");
  if (j.contains("max_epochs")) c.max_epochs = get_as<int>(j, "max_epochs");
  if (j.contains("fragment")) {
    const json& f = j.at("fragment");
    if (f.is_boolean()) {
      c.fragment.enabled = f.get<bool>();
    } else if (f.is_object()) {
      c.fragment.enabled = true;
      if (f.contains("window")) c.fragment.window = get_as<std::size_t>(f, "window");
      if (f.contains("overlap")) c.fragment.overlap = get_as<double>(f, "overlap");
    } else if (!f.is_null()) {
      fail(ErrorCode::ConfigError, "fragment must be a boolean or {window, overlap}");
    }
  }
  if (j.contains("length_cap") && !j.at("length_cap").is_null()) c.length_cap = get_as<std::size_t>(j, "length_cap");
  if (j.contains("group3_training")) c.group3_training = get_as<bool>(j, "group3_training");
  if (j.contains("balanced_sampling")) c.balanced_sampling = get_as<bool>(j, "balanced_sampling");
  if (j.contains("class_weights")) c.class_weights = get_as<bool>(j, "class_weights");
  if (j.contains("stop_at_train_acc") && !j.at("stop_at_train_acc").is_null()) {
    c.stop_at_train_acc = get_as<double>(j, "stop_at_train_acc");
  }
  if (j.contains("out")) c.out = resolve(get_as<std::string>(j, "out"), base_dir);
  if (j.contains("single_thread")) c.single_thread = get_as<bool>(j, "single_thread");
  validate(c);
  return c;
}

json experiment_to_json(const ExperimentConfig& c) {
  json j{{"manifest", c.manifest.string()},
         {"rep", rep_name_string(c.rep)},
         {"loss", head_kind_string(c.loss)},
         {"fusion", fusion_string(c.fusion)},
         {"fusion_inputs", rep_list(c.fusion_inputs)},
         {"K", c.num_classes},
         {"fold", c.fold},
         {"split_strategy", strategy_string(c.split_strategy)},
         {"seed", c.seed},
         {"lr", c.lr},
         {"clip", c.clip},
         {"batch_size", c.batch_size},
         {"dropout", c.dropout},
         {"hidden", c.hidden},
         {"layers", c.layers},
         {"pitch_embed_dim", c.pitch_embed_dim},
         {"int_heads", c.int_heads},
         {"alpha", c.alpha},
         {"patience", c.patience},
         {"max_epochs", c.max_epochs},
         {"group3_training", c.group3_training},
         {"balanced_sampling", c.balanced_sampling},
         {"class_weights", c.class_weights},
         {"out", c.out.string()},
         {"single_thread", c.single_thread}};
  j["fragment"] = c.fragment.enabled ? json{{"window", c.fragment.window}, {"overlap", c.fragment.overlap}} : json(false);
  j["length_cap"] = c.length_cap ? json(*c.length_cap) : json(nullptr);
  j["stop_at_train_acc"] = c.stop_at_train_acc ? json(*c.stop_at_train_acc) : json(nullptr);
  return j;
}

json classifier_config_to_json(const ClassifierConfig& c) {
  return {{"rep", rep_name_string(c.rep)},
          {"K", c.num_classes},
          {"head", head_kind_string(c.head)},
          {"fusion", fusion_string(c.fusion)},
          {"fusion_inputs", rep_list(c.fusion_inputs)},
          {"hidden", c.gru.hidden_dim},
          {"layers", c.gru.num_layers},
          {"dropout", c.gru.inter_layer_dropout},
          {"pitch_embed_dim", c.pitch_embed_dim},
          {"int_heads", c.int_heads},
          {"int_head_dim", c.int_head_dim},
          {"argnn_dim", c.argnn_dim},
          {"virtuoso_enc_dim", c.virtuoso_enc_dim},
          {"seed", c.seed}};
}

ClassifierConfig classifier_config_from_json(const json& j) {
  ClassifierConfig c;
  c.rep = parse_rep_name(get_as<std::string>(j, "rep"));
  c.num_classes = get_as<int>(j, "K");
  c.head = parse_head_kind(get_as<std::string>(j, "head"));
  c.fusion = parse_fusion(get_as<std::string>(j, "fusion"));
  c.fusion_inputs.clear();
  for (const auto& r : get_as<std::vector<std::string>>(j, "fusion_inputs")) c.fusion_inputs.push_back(parse_rep_name(r));
  c.gru.hidden_dim = get_as<nn::Index>(j, "hidden");
  c.gru.num_layers = get_as<int>(j, "layers");
  c.gru.inter_layer_dropout = get_as<double>(j, "dropout");
  c.pitch_embed_dim = get_as<nn::Index>(j, "pitch_embed_dim");
  c.int_heads = get_as<int>(j, "int_heads");
  c.int_head_dim = get_as<nn::Index>(j, "int_head_dim");
  c.argnn_dim = get_as<nn::Index>(j, "argnn_dim");
  c.virtuoso_enc_dim = get_as<nn::Index>(j, "virtuoso_enc_dim");
  c.seed = get_as<std::uint64_t>(j, "seed");
  return c;
}

// ---------------------------------------------------------------------------

std::set<RepName> required_reps(RepName rep, Fusion fusion, const std::vector<RepName>& inputs) {
  if (rep != RepName::Fused || fusion == Fusion::None) return {rep};
  return {inputs.begin(), inputs.end()};
}

PieceData load_piece(const std::string& piece_id, int label, const fs::path& score,
                     const std::map<std::string, std::vector<fs::path>>& embeddings,
                     const std::set<RepName>& reps) {
  PieceData p;
  p.piece_id = piece_id;
  p.label = label;
  NoteSequence seq = parse_musicxml(score);
  seq.piece_id = piece_id;
  p.n_notes = seq.notes.size();
  const std::vector<Hand> hands = seq.hand_tags();
  for (RepName rep : reps) {
    if (rep == RepName::Pitch) {
      p.features[rep] = pitch_tokens(seq);
      continue;
    }
    const std::string key(rep_name_string(rep));
    auto it = embeddings.find(key);
    const std::size_t files = rep == RepName::Argnn ? 2 : 1;
    if (it == embeddings.end() || it->second.size() != files) {
      fail(ErrorCode::ConfigError, "piece '" + piece_id + "' has no " + key + " embedding" +
                                       (files == 2 ? " pair (rh, lh)" : ""));
    }
    std::vector<nn::Matrix> branches;
    for (const auto& path : it->second) branches.push_back(to_double(load_embedding(path)));
    if (rep != RepName::Argnn && static_cast<std::size_t>(branches[0].rows()) != p.n_notes) {
      fail(ErrorCode::LengthMismatch, key + " embedding has " + std::to_string(branches[0].rows()) +
                                          " rows but the score has " + std::to_string(p.n_notes) + " notes");
    }
    p.features[rep] = embedding_sequence(rep, std::move(branches), hands);
  }
  return p;
}

int prepare_manifest(CorpusManifest& manifest, const ExperimentConfig& c) {
  int k = manifest.num_classes;
  if (c.group3_training) {
    if (manifest.num_classes != 9) {
      fail(ErrorCode::ConfigError, "group3_training needs a 9-class manifest, got K=" + std::to_string(k));
    }
    for (auto& e : manifest.entries) e.label = group3(e.label);
    k = 3;
    manifest.num_classes = 3;
  }
  if (c.num_classes != 0 && c.num_classes != k) {
    fail(ErrorCode::ConfigError, "config K=" + std::to_string(c.num_classes) +
                                     " does not match the manifest's K=" + std::to_string(k));
  }
  if (c.length_cap) {
    std::erase_if(manifest.entries, [&](const ManifestEntry& e) { return e.n_notes > *c.length_cap; });
  }
  if (manifest.entries.empty()) fail(ErrorCode::DataError, "no pieces left after filtering");
  return k;
}

ClassifierConfig classifier_config_for(const ExperimentConfig& c, int num_classes,
                                       const std::vector<PieceData>& pieces) {
  ClassifierConfig m;
  m.rep = c.rep;
  m.num_classes = num_classes;
  m.head = c.loss;
  m.fusion = c.fusion;
  m.fusion_inputs = c.fusion_inputs;
  m.gru.hidden_dim = c.hidden;
  m.gru.num_layers = c.layers;
  m.gru.inter_layer_dropout = c.dropout;
  m.pitch_embed_dim = c.pitch_embed_dim;
  m.int_heads = c.int_heads;
  m.seed = hash_combine(hash_combine(c.seed, kInitTag), static_cast<std::uint64_t>(c.fold));
  auto width_of = [&](RepName rep) -> nn::Index {
    for (const auto& p : pieces) {
      auto it = p.features.find(rep);
      if (it == p.features.end()) continue;
      for (const auto& b : it->second.branches) {
        if (b.rows() > 0) return b.cols();
      }
    }
    return 0;
  };
  m.argnn_dim = width_of(RepName::Argnn);
  m.virtuoso_enc_dim = width_of(RepName::VirtuosoEnc);
  for (const auto& p : pieces) {
    for (const auto& [rep, seq] : p.features) {
      if (rep != RepName::Argnn && rep != RepName::VirtuosoEnc) continue;
      const nn::Index expected = rep == RepName::Argnn ? m.argnn_dim : m.virtuoso_enc_dim;
      for (const auto& b : seq.branches) {
        if (b.rows() > 0 && b.cols() != expected) {
          fail(ErrorCode::DataError, "piece '" + p.piece_id + "' has " + std::string(rep_name_string(rep)) +
                                         " width " + std::to_string(b.cols()) + ", expected " +
                                         std::to_string(expected));
        }
      }
    }
  }
  validate(m);
  return m;
}

// ---------------------------------------------------------------------------

std::vector<PredictionRecord> predict_pieces(const Classifier& model, const std::vector<PieceData>& pieces,
                                             bool single_thread) {
  std::vector<PredictionRecord> out(pieces.size());
  parallel_for(pieces.size(), single_thread, [&](std::size_t i) {
    const ModelInput input = make_model_input(model.config(), pieces[i].features);
    const HeadOutput head = model.forward(input, nn::Mode::Eval, 0, nullptr);
    out[i].piece_id = pieces[i].piece_id;
    out[i].raw = head_activations(head);
    out[i].distribution = probs_from_head(head);
    out[i].label = decode_head(head);
  });
  return out;
}

MetricsReport score_predictions(const std::vector<PieceData>& pieces,
                                const std::vector<PredictionRecord>& predictions, int num_classes) {
  std::map<std::string, int> truth_of;
  for (const auto& p : pieces) truth_of[p.piece_id] = p.label;
  std::vector<int> truth;
  std::vector<Prediction> preds;
  for (const auto& r : predictions) {
    auto it = truth_of.find(r.piece_id);
    if (it == truth_of.end()) fail(ErrorCode::CoverageMismatch, "prediction for unknown piece '" + r.piece_id + "'");
    truth.push_back(it->second);
    preds.push_back(r.label);
  }
  return compute_metrics(truth, preds, num_classes);
}

FitResult fit(const ExperimentConfig& c, const ClassifierConfig& model_config,
              const std::vector<PieceData>& train, const std::vector<PieceData>& val) {
  if (train.empty()) fail(ErrorCode::InsufficientData, "training subset is empty");
  const int k = model_config.num_classes;
  auto model = std::make_unique<Classifier>(model_config);

  // Training units: whole pieces, or fragments inheriting the piece label.
  std::vector<ModelInput> units;
  std::vector<int> unit_labels;
  for (const auto& p : train) {
    if (c.fragment.enabled) {
      for (const auto& span : fragment_spans(p.n_notes, c.fragment.window, c.fragment.overlap)) {
        units.push_back(make_model_input(model_config, slice_features(p.features, span.start, span.length)));
        unit_labels.push_back(p.label);
      }
    } else {
      units.push_back(make_model_input(model_config, p.features));
      unit_labels.push_back(p.label);
    }
  }
  const std::vector<double> weights =
      c.class_weights ? class_weights(unit_labels, k) : std::vector<double>(static_cast<std::size_t>(k), 1.0);
  LossOptions loss_options;
  loss_options.alpha = c.alpha;
  loss_options.use_class_weights = c.class_weights;

  const std::uint64_t run_seed = hash_combine(c.seed, static_cast<std::uint64_t>(c.fold));
  BalancedSampler sampler(unit_labels, hash_combine(run_seed, kSamplerTag));
  std::mt19937_64 shuffle_rng(hash_combine(run_seed, kSamplerTag + 1));
  const std::uint64_t dropout_base = hash_combine(run_seed, kDropoutTag);
  nn::AdamConfig adam;
  adam.learning_rate = c.lr;
  adam.clip_norm = c.clip;

  FitResult result;
  result.train_units = units.size();
  EarlyStopping stopper(c.patience);
  nn::ParameterStore best = model->params();
  double best_train_acc = 0.0;

  for (int epoch = 1; epoch <= c.max_epochs; ++epoch) {
    std::vector<std::vector<std::size_t>> batches;
    if (c.balanced_sampling) {
      batches = sampler.epoch_batches(c.batch_size);
    } else {
      std::vector<std::size_t> order(units.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (std::size_t at = 0; at < order.size(); at += c.batch_size) {
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), at + c.batch_size)));
      }
    }
    double loss_sum = 0.0;
    double grad_norm = 0.0;
    std::uint64_t draw = 0;
    const std::uint64_t epoch_seed = hash_combine(dropout_base, static_cast<std::uint64_t>(epoch));
    for (const auto& idx : batches) {
      std::vector<BatchSample> batch;
      for (std::size_t i : idx) batch.push_back({&units[i], unit_labels[i], hash_combine(epoch_seed, draw++)});
      loss_sum += batch_loss(*model, batch, weights, loss_options, nn::Mode::Train, true) *
                  static_cast<double>(batch.size());
      grad_norm = nn::adam_step(model->params(), adam).grad_norm;
    }

    const MetricsReport train_metrics = score_predictions(train, predict_pieces(*model, train, c.single_thread), k);
    const MetricsReport val_metrics = val.empty() ? train_metrics
                                                  : score_predictions(val, predict_pieces(*model, val, c.single_thread), k);
    const bool improved = stopper.update({val_metrics.acc_k, val_metrics.mse});
    if (improved) {
      best = model->params();
      best_train_acc = train_metrics.acc_k;
    }
    result.epochs_run = epoch;
    result.log.push_back({{"epoch", epoch},
                          {"loss", loss_sum / static_cast<double>(draw)},
                          {"grad_norm", grad_norm},
                          {"train_units", units.size()},
                          {"train_acc_k", train_metrics.acc_k},
                          {"train_mse", train_metrics.mse},
                          {"val_acc_k", val_metrics.acc_k},
                          {"val_acc_pm1", val_metrics.acc_pm1},
                          {"val_mse", val_metrics.mse},
                          {"val_undefined", val_metrics.undefined_count},
                          {"val_on_train", val.empty()},
                          {"improved", improved},
                          {"best_epoch", stopper.best_epoch()}});

    if (c.stop_at_train_acc && train_metrics.acc_k >= *c.stop_at_train_acc) {
      result.stop_reason = "train_acc_target";
      result.best_epoch = epoch;
      result.train_acc_k = train_metrics.acc_k;
      result.model = std::move(model);
      return result;
    }
    if (stopper.should_stop()) {
      result.stop_reason = "patience";
      break;
    }
  }
  if (result.stop_reason.empty()) result.stop_reason = "max_epochs";
  result.best_epoch = stopper.best_epoch();
  result.train_acc_k = best_train_acc;
  model->params() = std::move(best);
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------

json train_experiment(const ExperimentConfig& c) {
  validate(c);
  if (c.manifest.empty()) fail(ErrorCode::ConfigError, "config needs a manifest");
  if (c.out.empty()) fail(ErrorCode::ConfigError, "config needs an output bundle directory");
  const PreparedSplit split = prepare_split(c.manifest, c, c.fold);
  const auto reps = required_reps(c.rep, c.fusion, c.fusion_inputs);
  const auto train = load_subset(split.manifest, split.plan, Subset::Train, reps, c.single_thread);
  const auto val = load_subset(split.manifest, split.plan, Subset::Val, reps, c.single_thread);
  std::vector<PieceData> all = train;
  all.insert(all.end(), val.begin(), val.end());
  const ClassifierConfig model_config = classifier_config_for(c, split.num_classes, all);

  FitResult result = fit(c, model_config, train, val);

  fs::create_directories(c.out);
  save_checkpoint(c.out / "model.ckpt", result.model->params());
  json training{{"best_epoch", result.best_epoch},
                {"epochs_run", result.epochs_run},
                {"stop_reason", result.stop_reason},
                {"train_units", result.train_units},
                {"train_pieces", train.size()},
                {"val_pieces", val.size()}};
  json config{{"format", "ordino-bundle"},
              {"version", 1},
              {"experiment", experiment_to_json(c)},
              {"model", classifier_config_to_json(model_config)},
              {"training", training}};
  write_text(c.out / "config.json", config.dump(2) + "\n");
  std::string log;
  for (const auto& line : result.log) log += line.dump() + "\n";
  write_text(c.out / "train_log.jsonl", log);
  write_text(c.out / "split.json", split_to_json(split.plan).dump() + "\n");
  training["bundle"] = c.out.string();
  return training;
}

json train_folds(const ExperimentConfig& c, const std::vector<int>& folds, int jobs) {
  std::vector<json> results(folds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < folds.size(); i = next++) {
      try {
        ExperimentConfig fc = c;
        fc.fold = folds[i];
        fc.out = c.out / ("fold" + std::to_string(folds[i]));
        results[i] = train_experiment(fc);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(folds.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return json(results);
}

// ---------------------------------------------------------------------------

Bundle load_bundle(const fs::path& dir) {
  const fs::path config_path = dir / "config.json";
  if (!fs::exists(config_path)) fail(ErrorCode::ConfigError, "'" + dir.string() + "' is not a model bundle");
  const json j = read_json_file(config_path);
  if (j.value("format", "") != "ordino-bundle") fail(ErrorCode::FormatError, "unrecognized bundle format");
  Bundle b;
  b.dir = dir;
  b.experiment = experiment_from_json(j.at("experiment"), dir);
  b.model = std::make_unique<Classifier>(classifier_config_from_json(j.at("model")));
  load_checkpoint(dir / "model.ckpt", b.model->params());
  return b;
}

namespace {

struct EvalSet {
  std::vector<PieceData> pieces;
  SplitPlan plan;
  fs::path manifest;
  int fold = 0;
};

EvalSet eval_set(const Bundle& b, const EvalRequest& req) {
  EvalSet s;
  s.manifest = req.manifest ? *req.manifest : b.experiment.manifest;
  s.fold = req.fold ? *req.fold : b.experiment.fold;
  ExperimentConfig cfg = b.experiment;
  cfg.num_classes = 0;
  PreparedSplit split = prepare_split(s.manifest, cfg, s.fold);
  const int model_k = b.model->config().num_classes;
  if (split.num_classes != model_k) {
    fail(ErrorCode::ConfigError, "bundle predicts K=" + std::to_string(model_k) + " classes but the manifest gives K=" +
                                     std::to_string(split.num_classes));
  }
  const auto& mc = b.model->config();
  s.plan = split.plan;
  s.pieces = load_subset(split.manifest, split.plan, req.subset, required_reps(mc.rep, mc.fusion, mc.fusion_inputs),
                         req.single_thread);
  if (s.pieces.empty()) fail(ErrorCode::InsufficientData, "evaluation subset is empty");
  return s;
}

json predictions_json(const std::vector<PredictionRecord>& preds, const std::vector<PieceData>& pieces) {
  std::map<std::string, int> truth;
  for (const auto& p : pieces) truth[p.piece_id] = p.label;
  json out = json::array();
  for (const auto& p : preds) out.push_back(prediction_json(p, truth.at(p.piece_id)));
  return out;
}

}  // namespace

json evaluate_bundle(const fs::path& dir, const EvalRequest& req) {
  const Bundle b = load_bundle(dir);
  const EvalSet s = eval_set(b, req);
  const auto preds = predict_pieces(*b.model, s.pieces, req.single_thread);
  const MetricsReport metrics = score_predictions(s.pieces, preds, b.model->config().num_classes);
  std::vector<std::string> ids;
  for (const auto& p : s.pieces) ids.push_back(p.piece_id);
  return {{"bundle", dir.string()},
          {"manifest", s.manifest.string()},
          {"fold", s.fold},
          {"subset", subset_string(req.subset)},
          {"split_seed", s.plan.seed},
          {"piece_ids", ids},
          {"metrics", metrics_to_json(metrics)},
          {"predictions", predictions_json(preds, s.pieces)}};
}

json ensemble_bundles(const std::vector<fs::path>& dirs, const EvalRequest& req) {
  if (dirs.empty()) fail(ErrorCode::ConfigError, "ensemble needs at least one bundle");
  std::vector<fs::path> sorted = dirs;
  std::sort(sorted.begin(), sorted.end());
  std::vector<Bundle> bundles;
  for (const auto& d : sorted) bundles.push_back(load_bundle(d));
  const auto& ref = bundles.front().experiment;
  for (const auto& b : bundles) {
    const auto& e = b.experiment;
    if (b.model->config().num_classes != bundles.front().model->config().num_classes ||
        e.seed != ref.seed || e.split_strategy != ref.split_strategy || e.length_cap != ref.length_cap ||
        e.group3_training != ref.group3_training || (!req.fold && e.fold != ref.fold)) {
      fail(ErrorCode::ConfigError, "bundle '" + b.dir.string() + "' uses a different K or fold definition");
    }
  }
  const int k = bundles.front().model->config().num_classes;
  json members = json::array();
  std::vector<std::vector<PredictionRecord>> member_preds;
  std::vector<PieceData> reference;
  fs::path manifest_used;
  int fold_used = 0;
  for (const auto& b : bundles) {
    const EvalSet s = eval_set(b, req);
    manifest_used = s.manifest;
    fold_used = s.fold;
    auto preds = predict_pieces(*b.model, s.pieces, req.single_thread);
    members.push_back({{"bundle", b.dir.string()},
                       {"rep", rep_name_string(b.model->config().rep)},
                       {"loss", head_kind_string(b.model->config().head)},
                       {"metrics", metrics_to_json(score_predictions(s.pieces, preds, k))}});
    member_preds.push_back(std::move(preds));
    if (reference.empty()) {
      reference = s.pieces;
      for (auto& p : reference) p.features.clear();
    }
  }
  const auto combined = ensemble_predict(member_preds);
  return {{"bundles", members.size()},
          {"manifest", manifest_used.string()},
          {"fold", fold_used},
          {"subset", subset_string(req.subset)},
          {"members", members},
          {"ensemble", metrics_to_json(score_predictions(reference, combined, k))},
          {"predictions", predictions_json(combined, reference)}};
}

json predict_score(const fs::path& dir, const fs::path& score,
                   const std::map<std::string, std::vector<fs::path>>& embeddings, std::size_t top_notes) {
  return predict_with_bundle(load_bundle(dir), score, embeddings, top_notes);
}

json predict_with_bundle(const Bundle& b, const fs::path& score,
                         const std::map<std::string, std::vector<fs::path>>& embeddings, std::size_t top_notes) {
  const auto& mc = b.model->config();
  const std::string piece_id = score.stem().string();
  const PieceData piece = load_piece(piece_id, 1, score, embeddings, required_reps(mc.rep, mc.fusion, mc.fusion_inputs));
  const ModelInput input = make_model_input(mc, piece.features);
  Classifier::Trace trace;
  const HeadOutput head = b.model->forward(input, nn::Mode::Eval, 0, &trace);
  PredictionRecord rec{piece_id, head_activations(head), probs_from_head(head), decode_head(head)};

  json attention = json::array();
  for (std::size_t br = 0; br < b.model->branches().size(); ++br) {
    const auto& spec = b.model->branches()[br];
    std::string name(rep_name_string(spec.source));
    if (spec.hand) name += *spec.hand == Hand::Right ? ".rh" : ".lh";
    json top = json::array();
    if (!trace.empty[br]) {
      const nn::Vector& alpha = trace.attention[br].alpha;
      std::vector<std::size_t> order(static_cast<std::size_t>(alpha.size()));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t c) { return alpha(static_cast<nn::Index>(a)) > alpha(static_cast<nn::Index>(c)); });
      for (std::size_t i = 0; i < std::min(top_notes, order.size()); ++i) {
        top.push_back({{"note", input.note_index[br][order[i]]}, {"weight", alpha(static_cast<nn::Index>(order[i]))}});
      }
    }
    attention.push_back({{"branch", name}, {"top_notes", top}});
  }
  json out = prediction_json(rec, std::nullopt);
  out["level"] = out["prediction"];
  out.erase("prediction");
  out["num_classes"] = mc.num_classes;
  out["n_notes"] = piece.n_notes;
  out["raw"] = std::vector<double>(rec.raw.data(), rec.raw.data() + rec.raw.size());
  out["attention"] = attention;
  return out;
}

}  // namespace ordino
