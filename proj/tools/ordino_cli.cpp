// SPDX-License-Identifier: Apache-2.0
// ordino: command-line front end over the ordino C API.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ordino/ordino.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 internal failure or failed check, 2 usage/config/input
// problems, 3 data or parse errors.
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct CommandError {
  int exit_code;
  std::string code;
  std::string message;
};

int exit_code_for(ordino_status s) {
  switch (s) {
    case ORDINO_CONFIG_ERROR:
    case ORDINO_INVALID_ARGUMENT:
    case ORDINO_IO_ERROR:
      return kExitUsage;
    case ORDINO_INTERNAL:
      return kExitFailure;
    default:
      return kExitData;
  }
}

void check(ordino_status s) {
  if (s != ORDINO_OK) throw CommandError{exit_code_for(s), ordino_status_name(s), ordino_last_error()};
}

[[noreturn]] void usage(const std::string& message) { throw CommandError{kExitUsage, "UsageError", message}; }

std::string take(char* text) {
  std::string out = text ? text : "";
  ordino_string_free(text);
  return out;
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) usage("cannot write '" + out_path + "'");
  out << text;
}

std::string pretty(const std::string& compact) { return json::parse(compact).dump(2) + "\n"; }

std::optional<std::uint64_t> env_seed() {
  const char* text = std::getenv("ORDINO_SEED");
  if (!text || !*text) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto value = std::stoull(text, &used);
    if (used != std::string(text).size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    usage(std::string("ORDINO_SEED must be an unsigned integer, got '") + text + "'");
  }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  return env_seed().value_or(0);
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) usage(std::string(what) + " '" + path + "' does not exist");
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// --embedding key=path; argnn takes argnn.rh=... and argnn.lh=... (or argnn=rh,lh).
json embedding_json(const std::vector<std::string>& specs) {
  json out = json::object();
  std::string rh;
  std::string lh;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) usage("--embedding expects key=path, got '" + spec + "'");
    const std::string key = spec.substr(0, eq);
    const std::string value = spec.substr(eq + 1);
    if (key == "argnn.rh") {
      rh = value;
    } else if (key == "argnn.lh") {
      lh = value;
    } else if (key == "argnn") {
      const auto parts = split_csv(value);
      if (parts.size() != 2) usage("argnn expects two files: argnn=rh.pemb,lh.pemb");
      rh = parts[0];
      lh = parts[1];
    } else if (key == "virtuoso" || key == "virtuoso_enc") {
      out[key] = value;
    } else {
      usage("unknown embedding key '" + key + "'");
    }
  }
  if (!rh.empty() || !lh.empty()) {
    if (rh.empty() || lh.empty()) usage("argnn needs both argnn.rh and argnn.lh");
    out["argnn"] = json::array({rh, lh});
  }
  return out;
}

// ---- commands

struct IngestArgs {
  std::string scores, labels, out;
  int classes = 9;
};

void run_ingest(const IngestArgs& a) {
  if (!fs::is_directory(a.scores)) usage("score directory '" + a.scores + "' does not exist");
  require_file(a.labels, "label file");
  ordino_manifest* m = nullptr;
  check(ordino_manifest_build(a.scores.c_str(), a.labels.c_str(), a.classes, &m));
  std::unique_ptr<ordino_manifest, decltype(&ordino_manifest_free)> guard(m, ordino_manifest_free);
  check(ordino_manifest_save(m, a.out.c_str()));
  char* rejects = nullptr;
  check(ordino_manifest_rejects_json(m, &rejects));
  const json rj = json::parse(take(rejects));
  for (const auto& r : rj) {
    std::cerr << "warning: rejected " << r.at("piece_id").get<std::string>() << " ("
              << r.at("code").get<std::string>() << "): " << r.at("message").get<std::string>() << "\n";
  }
  std::cout << json{{"manifest", a.out}, {"entries", ordino_manifest_entry_count(m)}, {"rejects", rj.size()}}.dump(2)
            << "\n";
}

struct SplitArgs {
  std::string manifest, strategy = "length_level", out;
  std::optional<std::uint64_t> seed;
};

void run_split(const SplitArgs& a) {
  require_file(a.manifest, "manifest");
  ordino_manifest* m = nullptr;
  check(ordino_manifest_load(a.manifest.c_str(), &m));
  std::unique_ptr<ordino_manifest, decltype(&ordino_manifest_free)> guard(m, ordino_manifest_free);
  char* text = nullptr;
  check(ordino_manifest_splits(m, a.strategy.c_str(), resolve_seed(a.seed), &text));
  write_output(pretty(take(text)), a.out);
}

struct TrainArgs {
  std::string config;
  std::string manifest, rep, loss, fusion, fusion_inputs, split_strategy, out, folds;
  std::optional<int> classes, fold, layers, patience, max_epochs, int_heads;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, clip, dropout, alpha, overlap, stop_at_train_acc;
  std::optional<std::size_t> batch_size, hidden, pitch_embed_dim, window, length_cap;
  bool fragment = false, group3 = false, no_balanced = false, no_class_weights = false, single_thread = false;
  int jobs = 1;
};

void run_train(const TrainArgs& a) {
  json cfg = json::object();
  std::string base = fs::current_path().string();
  if (!a.config.empty()) {
    require_file(a.config, "config file");
    std::ifstream in(a.config);
    try {
      cfg = json::parse(in);
    } catch (const json::exception& e) {
      throw CommandError{kExitUsage, "ConfigError", std::string("malformed config: ") + e.what()};
    }
    if (!cfg.is_object()) usage("config file must hold a JSON object");
    base = fs::absolute(a.config).parent_path().string();
  }
  auto abs = [](const std::string& p) { return fs::absolute(p).lexically_normal().string(); };
  if (!a.manifest.empty()) cfg["manifest"] = abs(a.manifest);
  if (!a.out.empty()) cfg["out"] = abs(a.out);
  if (!a.rep.empty()) cfg["rep"] = a.rep;
  if (!a.loss.empty()) cfg["loss"] = a.loss;
  if (!a.fusion.empty()) cfg["fusion"] = a.fusion;
  if (!a.fusion_inputs.empty()) cfg["fusion_inputs"] = split_csv(a.fusion_inputs);
  if (!a.split_strategy.empty()) cfg["split_strategy"] = a.split_strategy;
  if (a.classes) cfg["K"] = *a.classes;
  if (a.fold) cfg["fold"] = *a.fold;
  if (a.layers) cfg["layers"] = *a.layers;
  if (a.patience) cfg["patience"] = *a.patience;
  if (a.max_epochs) cfg["max_epochs"] = *a.max_epochs;
  if (a.int_heads) cfg["int_heads"] = *a.int_heads;
  if (a.lr) cfg["lr"] = *a.lr;
  if (a.clip) cfg["clip"] = *a.clip;
  if (a.dropout) cfg["dropout"] = *a.dropout;
  if (a.alpha) cfg["alpha"] = *a.alpha;
  if (a.stop_at_train_acc) cfg["stop_at_train_acc"] = *a.stop_at_train_acc;
  if (a.batch_size) cfg["batch_size"] = *a.batch_size;
  if (a.hidden) cfg["hidden"] = *a.hidden;
  if (a.pitch_embed_dim) cfg["pitch_embed_dim"] = *a.pitch_embed_dim;
  if (a.length_cap) cfg["length_cap"] = *a.length_cap;
  if (a.fragment || a.window || a.overlap) {
    json f = cfg.contains("fragment") && cfg["fragment"].is_object() ? cfg["fragment"] : json::object();
    if (a.window) f["window"] = *a.window;
    if (a.overlap) f["overlap"] = *a.overlap;
    cfg["fragment"] = f;
  }
  if (a.group3) cfg["group3_training"] = true;
  if (a.no_balanced) cfg["balanced_sampling"] = false;
  if (a.no_class_weights) cfg["class_weights"] = false;
  if (a.single_thread) cfg["single_thread"] = true;
  if (a.seed) {
    cfg["seed"] = *a.seed;
  } else if (!cfg.contains("seed")) {
    if (auto s = env_seed()) cfg["seed"] = *s;
  }
  if (!cfg.contains("manifest")) usage("train needs a manifest (config key or --manifest)");
  if (!cfg.contains("out")) usage("train needs an output bundle directory (config key or --out)");

  char* text = nullptr;
  const std::string cfg_text = cfg.dump();
  if (a.folds.empty()) {
    check(ordino_train(cfg_text.c_str(), base.c_str(), &text));
  } else {
    std::vector<int> folds;
    for (const auto& f : split_csv(a.folds)) {
      try {
        folds.push_back(std::stoi(f));
      } catch (const std::exception&) {
        usage("--folds expects integers, got '" + f + "'");
      }
    }
    check(ordino_train_folds(cfg_text.c_str(), base.c_str(), folds.data(), folds.size(), a.jobs, &text));
  }
  std::cout << pretty(take(text));
}

struct EvalArgs {
  std::string bundle, bundles, manifest, subset = "test", out;
  std::optional<int> fold;
  bool single_thread = false;
};

std::string eval_request(const EvalArgs& a) {
  json r{{"subset", a.subset}, {"single_thread", a.single_thread}};
  if (!a.manifest.empty()) {
    require_file(a.manifest, "manifest");
    r["manifest"] = fs::absolute(a.manifest).lexically_normal().string();
  }
  if (a.fold) r["fold"] = *a.fold;
  return r.dump();
}

void run_evaluate(const EvalArgs& a) {
  if (!fs::is_directory(a.bundle)) usage("bundle '" + a.bundle + "' does not exist");
  char* text = nullptr;
  check(ordino_evaluate(a.bundle.c_str(), eval_request(a).c_str(), &text));
  write_output(pretty(take(text)), a.out);
}

void run_ensemble(const EvalArgs& a) {
  const auto list = split_csv(a.bundles);
  if (list.empty()) usage("--bundles needs at least one bundle");
  std::vector<const char*> ptrs;
  for (const auto& b : list) {
    if (!fs::is_directory(b)) usage("bundle '" + b + "' does not exist");
    ptrs.push_back(b.c_str());
  }
  char* text = nullptr;
  check(ordino_ensemble(ptrs.data(), ptrs.size(), eval_request(a).c_str(), &text));
  write_output(pretty(take(text)), a.out);
}

struct PredictArgs {
  std::string bundle, score, out;
  std::vector<std::string> embeddings;
};

void run_predict(const PredictArgs& a) {
  if (!fs::is_directory(a.bundle)) usage("bundle '" + a.bundle + "' does not exist");
  require_file(a.score, "score");
  const std::string emb = embedding_json(a.embeddings).dump();
  char* text = nullptr;
  check(ordino_predict(a.bundle.c_str(), a.score.c_str(), emb.c_str(), &text));
  write_output(pretty(take(text)), a.out);
}

struct GradcheckArgs {
  std::string filter, out;
  std::optional<std::size_t> max_length, hidden;
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
};

int run_gradcheck(const GradcheckArgs& a) {
  json opts = json::object();
  if (!a.filter.empty()) opts["filter"] = a.filter;
  if (a.max_length) opts["max_length"] = *a.max_length;
  if (a.hidden) opts["hidden"] = *a.hidden;
  if (a.tolerance) opts["tolerance"] = *a.tolerance;
  if (a.seed) opts["seed"] = *a.seed;
  char* text = nullptr;
  int passed = 0;
  check(ordino_gradcheck(opts.dump().c_str(), &text, &passed));
  write_output(pretty(take(text)), a.out);
  return passed ? 0 : kExitFailure;
}

struct SynthArgs {
  std::string score, scores, out_dir, reps;
  std::uint32_t dim = 16;
  std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& a) {
  if (a.score.empty() == a.scores.empty()) usage("synth-embed needs exactly one of --score or --scores");
  std::vector<fs::path> files;
  if (!a.score.empty()) {
    require_file(a.score, "score");
    files.emplace_back(a.score);
  } else {
    if (!fs::is_directory(a.scores)) usage("score directory '" + a.scores + "' does not exist");
    for (const auto& e : fs::directory_iterator(a.scores)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".xml" || ext == ".musicxml" || ext == ".mxl")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  }
  const std::uint64_t seed = resolve_seed(a.seed);
  json written = json::array();
  for (const auto& f : files) {
    const std::string out_dir = a.out_dir.empty() ? f.parent_path().string() : a.out_dir;
    char* text = nullptr;
    const ordino_status s = ordino_synth_embed(f.string().c_str(), out_dir.c_str(), nullptr, a.dim, seed,
                                               a.reps.empty() ? nullptr : a.reps.c_str(), &text);
    if (s != ORDINO_OK && !a.scores.empty() && exit_code_for(s) == kExitData) {
      std::cerr << "warning: skipped " << f.string() << " (" << ordino_status_name(s) << "): " << ordino_last_error()
                << "\n";
      continue;
    }
    check(s);
    written.push_back(json::parse(take(text)));
  }
  std::cout << written.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ordino: ordinal difficulty classification for piano scores"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ordino_version()));
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse scores and labels into a manifest");
  c_ingest->add_option("--scores", ingest.scores, "Score directory")->required();
  c_ingest->add_option("--labels", ingest.labels, "Labels (JSON Lines)")->required();
  c_ingest->add_option("--out", ingest.out, "Manifest to write")->required();
  c_ingest->add_option("-K,--classes", ingest.classes, "Number of difficulty levels")->capture_default_str();

  SplitArgs split;
  auto* c_split = app.add_subcommand("split", "Generate the five stratified split plans");
  c_split->add_option("--manifest", split.manifest)->required();
  c_split->add_option("--strategy", split.strategy, "length_level | composer_level")->capture_default_str();
  c_split->add_option("--seed", split.seed, "Master seed (default: ORDINO_SEED, else 0)");
  c_split->add_option("--out", split.out, "Output file (default: stdout)");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model bundle");
  c_train->add_option("--config", train.config, "Experiment config (JSON)");
  c_train->add_option("--manifest", train.manifest);
  c_train->add_option("--out", train.out, "Bundle directory");
  c_train->add_option("--rep", train.rep, "pitch | argnn | virtuoso | virtuoso_enc | fused");
  c_train->add_option("--loss", train.loss, "nll | regclass | msmooth | ordinal | coral");
  c_train->add_option("--fusion", train.fusion, "none | sync | concat | sum | att | int");
  c_train->add_option("--fusion-inputs", train.fusion_inputs, "Comma-separated component representations");
  c_train->add_option("-K,--classes", train.classes);
  c_train->add_option("--fold", train.fold);
  c_train->add_option("--folds", train.folds, "Comma-separated folds, each trained into <out>/fold<k>");
  c_train->add_option("--jobs", train.jobs, "Folds trained concurrently")->capture_default_str();
  c_train->add_option("--split-strategy", train.split_strategy);
  c_train->add_option("--seed", train.seed);
  c_train->add_option("--lr", train.lr);
  c_train->add_option("--clip", train.clip);
  c_train->add_option("--batch-size", train.batch_size);
  c_train->add_option("--dropout", train.dropout);
  c_train->add_option("--hidden", train.hidden);
  c_train->add_option("--layers", train.layers);
  c_train->add_option("--pitch-embed-dim", train.pitch_embed_dim);
  c_train->add_option("--int-heads", train.int_heads);
  c_train->add_option("--alpha", train.alpha);
  c_train->add_option("--patience", train.patience);
  c_train->add_option("--max-epochs", train.max_epochs);
  c_train->add_flag("--fragment", train.fragment, "Train on overlapping note windows");
  c_train->add_option("--window", train.window);
  c_train->add_option("--overlap", train.overlap);
  c_train->add_option("--length-cap", train.length_cap);
  c_train->add_flag("--group3", train.group3, "Map nine levels to three before training");
  c_train->add_flag("--no-balanced-sampling", train.no_balanced);
  c_train->add_flag("--no-class-weights", train.no_class_weights);
  c_train->add_option("--stop-at-train-acc", train.stop_at_train_acc);
  c_train->add_flag("--single-thread", train.single_thread, "Run without worker threads");

  EvalArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Evaluate a bundle on a split subset");
  c_eval->add_option("--bundle", evaluate.bundle)->required();
  c_eval->add_option("--manifest", evaluate.manifest, "Default: the training manifest");
  c_eval->add_option("--fold", evaluate.fold, "Default: the training fold");
  c_eval->add_option("--subset", evaluate.subset, "train | val | test")->capture_default_str();
  c_eval->add_option("--out", evaluate.out);
  c_eval->add_flag("--single-thread", evaluate.single_thread);

  EvalArgs ensemble;
  auto* c_ens = app.add_subcommand("ensemble", "Average the predictions of several bundles");
  c_ens->add_option("--bundles", ensemble.bundles, "Comma-separated bundle directories")->required();
  c_ens->add_option("--manifest", ensemble.manifest);
  c_ens->add_option("--fold", ensemble.fold);
  c_ens->add_option("--subset", ensemble.subset)->capture_default_str();
  c_ens->add_option("--out", ensemble.out);
  c_ens->add_flag("--single-thread", ensemble.single_thread);

  PredictArgs predict;
  auto* c_pred = app.add_subcommand("predict", "Predict the level of one score");
  c_pred->add_option("--bundle", predict.bundle)->required();
  c_pred->add_option("--score", predict.score)->required();
  c_pred->add_option("--embedding,--embeddings", predict.embeddings,
                     "key=path with key in virtuoso, virtuoso_enc, argnn.rh, argnn.lh");
  c_pred->add_option("--out", predict.out);

  GradcheckArgs gradcheck;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference check of every model configuration");
  c_grad->add_option("--filter", gradcheck.filter, "Only cases whose name contains this text");
  c_grad->add_option("--max-length", gradcheck.max_length);
  c_grad->add_option("--hidden", gradcheck.hidden);
  c_grad->add_option("--seed", gradcheck.seed);
  c_grad->add_option("--tolerance", gradcheck.tolerance);
  c_grad->add_option("--out", gradcheck.out);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-embed", "Write deterministic pseudo-embeddings for scores");
  c_synth->add_option("--score", synth.score);
  c_synth->add_option("--scores", synth.scores, "Directory of scores");
  c_synth->add_option("--out-dir", synth.out_dir, "Default: next to each score");
  c_synth->add_option("--dim", synth.dim, "Width of virtuoso_enc and argnn embeddings")->capture_default_str();
  c_synth->add_option("--reps", synth.reps, "Comma-separated subset of virtuoso,virtuoso_enc,argnn");
  c_synth->add_option("--seed", synth.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "UsageError"}, {"exit_code", kExitUsage}, {"message", e.what()}}.dump() << "\n";
    return kExitUsage;
  }

  ordino_set_warnings(quiet ? 0 : 1);
  try {
    if (*c_ingest) run_ingest(ingest);
    if (*c_split) run_split(split);
    if (*c_train) run_train(train);
    if (*c_eval) run_evaluate(evaluate);
    if (*c_ens) run_ensemble(ensemble);
    if (*c_pred) run_predict(predict);
    if (*c_grad) return run_gradcheck(gradcheck);
    if (*c_synth) run_synth(synth);
  } catch (const CommandError& e) {
    std::cerr << json{{"error", e.code}, {"exit_code", e.exit_code}, {"message", e.message}}.dump() << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Internal"}, {"exit_code", kExitFailure}, {"message", e.what()}}.dump() << "\n";
    return kExitFailure;
  }
  return 0;
}
