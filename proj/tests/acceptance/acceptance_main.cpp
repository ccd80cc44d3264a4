// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/experiment.hpp"
#include "core/features.hpp"
#include "core/gradcheck_suite.hpp"
#include "core/losses.hpp"
#include "core/manifest.hpp"
#include "core/metrics.hpp"
#include "core/score.hpp"
#include "core/splits.hpp"
#include "oracles.hpp"
#include "testkit.hpp"

using namespace ordino;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Collects failed checks of one criterion.
struct Checker {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      std::ostringstream s;
      s.precision(17);
      s << what << ": got " << got << ", want " << want << " +- " << tol;
      failures.push_back(s.str());
    }
  }
};

struct Outcome {
  bool passed = false;
  std::string detail;
};

Outcome finish(const Checker& c, const std::string& detail) {
  if (c.failures.empty()) return {true, detail};
  std::string text = std::to_string(c.failures.size()) + " check(s) failed; first: " + c.failures.front();
  if (!detail.empty()) text += " (" + detail + ")";
  return {false, text};
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << v;
  return s.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

// ---------------------------------------------------------------------------

Outcome gradient_integrity() {
  Checker c;
  GradCheckSuiteOptions opts;
  opts.max_length = 8;
  const auto start = Clock::now();
  const auto cases = run_gradcheck_suite(opts);
  const double elapsed = seconds_since(start);
  std::set<std::string> names;
  double worst = 0.0;
  std::string worst_case;
  for (const auto& k : cases) {
    names.insert(k.name);
    if (k.report.max_rel_error >= worst) {
      worst = k.report.max_rel_error;
      worst_case = k.name;
    }
    c.expect(k.report.checked_entries > 0, k.name + " checked nothing");
    c.expect(k.report.max_rel_error <= 1e-4, k.name + " max rel error " + sci(k.report.max_rel_error));
  }
  c.expect(cases.size() == 45 && names.size() == 45, "expected 45 distinct cases, got " + std::to_string(cases.size()));
  c.expect(elapsed <= 120.0, "runtime " + fmt(elapsed, 1) + " s exceeds 120 s");
  return finish(c, std::to_string(cases.size()) + " cases, max rel error " + sci(worst) + " (" + worst_case + "), " +
                       fmt(elapsed, 1) + " s");
}

Outcome loss_values() {
  Checker c;
  const std::vector<int> one{1};
  const std::vector<int> two{2};
  const Matrix lp = row({std::log(0.5), std::log(0.25), std::log(0.25)});
  c.near(nll_loss(lp, one), 0.693147, 1e-6, "NLL");
  const std::vector<double> scalar{1.5};
  c.near(regclass_loss(lp, scalar, one, 1.0), 0.943147, 1e-6, "RegClass");
  const std::vector<double> g{0.0};
  const std::vector<double> b{0.0, 0.0};
  c.near(coral_loss(g, b, two), 1.386294, 1e-6, "CORAL");
  c.near(ordinal_loss(row({1.0, 0.0}), two), 0.5, 1e-6, "ordinal K=2");
  const auto smooth = smoothed_encode(5, 9).values;
  c.near(smooth[3], 0.1353, 1e-4, "MSmooth neighbour weight (4 dp)");
  c.near(smooth[3], std::exp(-2.0), 1e-6, "MSmooth neighbour weight");
  c.near(smooth[5], std::exp(-2.0), 1e-6, "MSmooth upper neighbour weight");
  c.near(smooth[4], 1.0, 1e-12, "MSmooth peak");
  c.near(smooth[2], 0.0, 0.0, "MSmooth truncation");

  // The same values through the model-head path.
  LossOptions o;
  HeadOutput nll{HeadKind::Nll, 3, Vector(3), 0.0};
  nll.logits << std::log(0.5), std::log(0.25), std::log(0.25);
  c.near(head_sample_loss(nll, 1, 1.0, o, nullptr), 0.693147, 1e-6, "NLL head");
  HeadOutput reg = nll;
  reg.kind = HeadKind::RegClass;
  reg.scalar = 1.5;
  c.near(head_sample_loss(reg, 1, 1.0, o, nullptr), 0.943147, 1e-6, "RegClass head");
  HeadOutput coral{HeadKind::Coral, 3, Vector::Zero(2), 0.0};
  c.near(head_sample_loss(coral, 2, 1.0, o, nullptr), 1.386294, 1e-6, "CORAL head");
  HeadOutput ord{HeadKind::Ordinal, 2, Vector(2), 0.0};
  ord.logits << 40.0, -40.0;
  c.near(head_sample_loss(ord, 2, 1.0, o, nullptr), 0.5, 1e-6, "ordinal head");
  return finish(c, "NLL, RegClass, CORAL, ordinal and MSmooth values within 1e-6");
}

Outcome encoding_roundtrip() {
  Checker c;
  int checked = 0;
  for (int k = 2; k <= 12; ++k) {
    for (int label = 1; label <= k; ++label) {
      const auto enc = ordinal_encode(label, k);
      c.expect(static_cast<int>(enc.values.size()) == k, "ordinal width");
      const auto dec = ordinal_decode(enc.values);
      c.expect(dec && *dec == label, "roundtrip K=" + std::to_string(k) + " label=" + std::to_string(label));
      ++checked;
    }
  }
  const std::vector<double> undefined{1, 0, 0, 0, 1, 0, 0, 0, 0};
  c.expect(!ordinal_decode(undefined).has_value(), "[1,0,0,0,1,0,0,0,0] must be undefined");
  return finish(c, std::to_string(checked) + " labels round-trip; the gapped example is undefined");
}

Outcome metric_oracle() {
  Checker c;
  for (int k : {3, 9}) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(9000 + k));
    std::uniform_int_distribution<int> label(1, k);
    std::uniform_int_distribution<int> pred(0, k);  // 0 = undefined
    std::vector<int> truth(1000);
    std::vector<int> preds(1000);
    std::vector<Prediction> as_pred;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      truth[i] = label(rng);
      preds[i] = pred(rng);
      as_pred.push_back(preds[i] == 0 ? Prediction{} : Prediction{preds[i]});
    }
    const auto r = compute_metrics(truth, as_pred, k);
    const auto o = oracle::tally(truth, preds, k, k == 9 ? 3 : 1);
    const std::string tag = " K=" + std::to_string(k);
    c.near(r.acc_k, o.acc_k, 1e-12, "acc_k" + tag);
    c.near(r.acc_pm1, o.acc_pm1, 1e-12, "acc_pm1" + tag);
    c.near(r.mse, o.mse, 1e-12, "mse" + tag);
    c.expect(r.acc_3.has_value(), "acc_3 missing" + tag);
    if (r.acc_3) c.near(*r.acc_3, o.acc_3, 1e-12, "acc_3" + tag);

    std::vector<Prediction> perfect(truth.begin(), truth.end());
    const auto p = compute_metrics(truth, perfect, k);
    c.near(p.acc_k, 100.0, 0.0, "perfect acc_k" + tag);
    c.near(p.acc_3.value_or(-1.0), 100.0, 0.0, "perfect acc_3" + tag);
    c.near(p.acc_pm1, 100.0, 0.0, "perfect acc_pm1" + tag);
    c.near(p.mse, 0.0, 0.0, "perfect mse" + tag);
  }
  return finish(c, "K=3 and K=9, 1000 pairs each, agree within 1e-12");
}

Outcome split_protocol() {
  Checker c;
  const auto manifest = testkit::synthetic_corpus_manifest(652);
  c.expect(manifest.entries.size() == 652, "manifest size");
  std::set<std::string> all;
  for (const auto& e : manifest.entries) all.insert(e.piece_id);
  double worst_global = 0.0;
  double worst_stratum = 0.0;
  for (auto strategy : {SplitStrategy::LengthLevel, SplitStrategy::ComposerLevel}) {
    const std::string sname(strategy_string(strategy));
    const auto plans = make_splits(manifest, strategy, 2024);
    c.expect(plans.size() == 5, sname + ": five folds");
    std::map<std::string, std::vector<std::string>> strata;
    for (const auto& e : manifest.entries) strata[stratum_key(e, strategy)].push_back(e.piece_id);
    std::set<std::string> seeds;
    for (const auto& plan : plans) {
      const std::string tag = sname + " fold " + std::to_string(plan.fold_id);
      seeds.insert(std::to_string(plan.seed));
      std::set<std::string> seen;
      std::size_t total = 0;
      for (auto s : {Subset::Train, Subset::Val, Subset::Test}) {
        const auto ids = plan.ids(s);
        total += ids.size();
        seen.insert(ids.begin(), ids.end());
        const double frac = static_cast<double>(ids.size()) / static_cast<double>(all.size());
        const double target = kSubsetFractions[static_cast<int>(s)];
        worst_global = std::max(worst_global, std::abs(frac - target));
        c.expect(std::abs(frac - target) <= 0.02,
                 tag + ": " + std::string(subset_string(s)) + " fraction " + fmt(frac, 4));
      }
      c.expect(total == all.size() && seen == all, tag + ": not an exact partition");
      for (const auto& [key, members] : strata) {
        if (members.size() < kMinProportionalStratum) continue;
        std::map<Subset, double> counts;
        for (const auto& id : members) counts[plan.assignment.at(id)] += 1.0;
        for (auto s : {Subset::Train, Subset::Val, Subset::Test}) {
          const double want = kSubsetFractions[static_cast<int>(s)] * static_cast<double>(members.size());
          const double dev = std::abs(counts[s] - want);
          worst_stratum = std::max(worst_stratum, dev);
          c.expect(dev <= 1.0 + 1e-9, tag + ": stratum " + key + " off by " + fmt(dev, 2));
        }
      }
    }
    c.expect(seeds.size() == 5, sname + ": fold seeds must differ");
    const auto again = make_splits(manifest, strategy, 2024);
    for (std::size_t f = 0; f < plans.size() && f < again.size(); ++f) {
      c.expect(split_to_json(plans[f]) == split_to_json(again[f]), sname + ": same seed must reproduce");
    }
  }
  return finish(c, "both strategies, worst subset deviation " + fmt(100.0 * worst_global, 2) +
                       "%, worst stratum deviation " + fmt(worst_stratum, 2) + " samples");
}

Outcome fragmenter() {
  Checker c;
  const auto spans = fragment_spans(640, 256, 0.25);
  c.expect(spans.size() == 3, "640 notes should give 3 spans, got " + std::to_string(spans.size()));
  for (std::size_t i = 0; i < spans.size(); ++i) {
    c.expect(spans[i].start == 192 * i && spans[i].length == 256, "span " + std::to_string(i));
    if (i > 0) {
      const std::size_t overlap = spans[i - 1].start + spans[i - 1].length - spans[i].start;
      c.expect(overlap == 64, "pairwise overlap " + std::to_string(overlap));
    }
  }
  std::mt19937_64 rng(640);
  std::uniform_int_distribution<std::size_t> len(1, 5000);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    const auto s = fragment_spans(n, 256, 0.25);
    std::vector<char> covered(n, 0);
    bool bounded = !s.empty();
    for (const auto& f : s) {
      bounded = bounded && f.length == std::min<std::size_t>(256, n) && f.start + f.length <= n;
      for (std::size_t i = f.start; i < std::min(n, f.start + f.length); ++i) covered[i] = 1;
    }
    c.expect(bounded, "span bounds for n=" + std::to_string(n));
    c.expect(std::all_of(covered.begin(), covered.end(), [](char x) { return x != 0; }),
             "coverage for n=" + std::to_string(n));
  }
  return finish(c, "starts 0/192/384, overlap 64; 1000 random lengths fully covered");
}

std::vector<PieceData> load_all(const CorpusManifest& m, const std::set<RepName>& reps) {
  std::vector<PieceData> out;
  for (const auto& e : m.entries) out.push_back(load_piece(e.piece_id, e.label, e.score_path, e.embedding_paths, reps));
  return out;
}

Outcome synthetic_overfit() {
  Checker c;
  testkit::TempDir dir;
  const auto labels = testkit::write_corpus(dir / "scores", testkit::overfit_pieces(7));
  const auto manifest = build_manifest(dir / "scores", labels, 4);
  c.expect(manifest.entries.size() == 32, "32 pieces");
  const auto pieces = load_all(manifest, {RepName::Pitch});

  ExperimentConfig cfg;
  cfg.rep = RepName::Pitch;
  cfg.loss = HeadKind::Ordinal;
  cfg.seed = 7;
  cfg.hidden = 16;
  cfg.layers = 1;
  cfg.pitch_embed_dim = 8;
  cfg.batch_size = 8;
  cfg.lr = 1e-2;
  cfg.max_epochs = 500;
  cfg.patience = 500;
  cfg.stop_at_train_acc = 100.0;
  cfg.single_thread = true;
  const auto mc = classifier_config_for(cfg, 4, pieces);

  const auto start = Clock::now();
  const FitResult r = fit(cfg, mc, pieces, {});
  const double elapsed = seconds_since(start);
  const auto report = score_predictions(pieces, predict_pieces(*r.model, pieces, true), 4);
  c.near(report.acc_k, 100.0, 0.0, "training acc_k");
  c.expect(r.epochs_run <= 500, "epochs " + std::to_string(r.epochs_run));
  c.expect(elapsed <= 60.0, "runtime " + fmt(elapsed, 1) + " s exceeds 60 s");
  return finish(c, "train acc " + fmt(report.acc_k, 1) + "% after " + std::to_string(r.epochs_run) + " epochs, " +
                       fmt(elapsed, 1) + " s");
}

Outcome ensemble_complementarity() {
  Checker c;
  testkit::TempDir dir;
  const auto pieces = testkit::multiview_pieces(31, 16);
  const auto labels = testkit::write_multiview_corpus(dir / "scores", pieces, 31);
  save_manifest(build_manifest(dir / "scores", labels, 8), dir / "m.jsonl");

  std::vector<fs::path> bundles;
  std::vector<std::pair<std::string, double>> singles;
  for (RepName rep : {RepName::Pitch, RepName::Virtuoso, RepName::Argnn}) {
    ExperimentConfig cfg;
    cfg.manifest = dir / "m.jsonl";
    cfg.rep = rep;
    cfg.loss = HeadKind::Nll;
    cfg.seed = 31;
    cfg.hidden = 8;
    cfg.layers = 1;
    cfg.pitch_embed_dim = 8;
    cfg.batch_size = 16;
    cfg.lr = 1e-2;
    cfg.max_epochs = 300;
    cfg.patience = 60;
    cfg.single_thread = true;
    cfg.out = dir / std::string(rep_name_string(rep));
    train_experiment(cfg);
    bundles.push_back(cfg.out);
    const json report = evaluate_bundle(cfg.out, EvalRequest{});
    singles.emplace_back(rep_name_string(rep), report.at("metrics").at("acc_k").get<double>());
  }
  const json ens = ensemble_bundles(bundles, EvalRequest{});
  const double ensemble_acc = ens.at("ensemble").at("acc_k").get<double>();
  double best = 0.0;
  std::string detail;
  for (const auto& [name, acc] : singles) {
    best = std::max(best, acc);
    detail += name + " " + fmt(acc, 1) + "%, ";
  }
  c.expect(ensemble_acc >= best, "ensemble " + fmt(ensemble_acc, 1) + "% below best single " + fmt(best, 1) + "%");
  return finish(c, detail + "ensemble " + fmt(ensemble_acc, 1) + "% (test subset, fold 0)");
}

Outcome tau_c() {
  Checker c;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto m = testkit::random_manifest(seed, 50, 9, seed % 2 ? 60 : 20000);
    std::vector<long> x;
    std::vector<long> y;
    for (const auto& e : m.entries) {
      x.push_back(static_cast<long>(e.n_notes));
      y.push_back(e.label);
    }
    const double got = corpus_tau_c(m);
    const double want = oracle::tau_c(x, y);
    worst = std::max(worst, std::abs(got - want));
    c.near(got, want, 1e-12, "manifest seed " + std::to_string(seed));
  }
  CorpusManifest perfect;
  for (int i = 0; i < 50; ++i) {
    ManifestEntry e;
    e.piece_id = "p" + std::to_string(i);
    e.label = 1 + i / 10;
    e.n_notes = static_cast<std::size_t>(100 + 37 * i);
    perfect.entries.push_back(e);
  }
  c.near(corpus_tau_c(perfect), 1.0, 1e-12, "perfect concordance");
  return finish(c, "20 random manifests, worst difference " + sci(worst) + "; perfect concordance 1.0");
}

struct CliRun {
  int exit_code = -1;
  std::string out;
};

CliRun cli(const testkit::TempDir& dir, const std::string& args) {
  const fs::path out = dir / "cli_stdout.txt";
  const std::string cmd = "env -u ORDINO_SEED '" + std::string(ORDINO_CLI_PATH) + "' -q " + args + " >'" +
                          out.string() + "' 2>'" + (dir / "cli_stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file_bytes(out)};
}

Outcome determinism() {
  Checker c;
  testkit::TempDir dir;
  const auto labels = testkit::write_corpus(dir / "scores", testkit::overfit_pieces(10));
  auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  c.expect(cli(dir, "ingest --scores " + q(dir / "scores") + " --labels " + q(labels) + " --out " + q(dir / "m.jsonl") +
                        " -K 4")
                   .exit_code == 0,
           "ingest");
  const std::string train = "train --manifest " + q(dir / "m.jsonl") +
                            " --hidden 6 --layers 2 --pitch-embed-dim 4 --batch-size 8 --lr 0.01 --max-epochs 4"
                            " --seed 99 --single-thread --out ";
  c.expect(cli(dir, train + q(dir / "a")).exit_code == 0, "first train");
  c.expect(cli(dir, train + q(dir / "b")).exit_code == 0, "second train");
  const std::string ckpt_a = read_file_bytes(dir / "a" / "model.ckpt");
  const std::string ckpt_b = read_file_bytes(dir / "b" / "model.ckpt");
  c.expect(!ckpt_a.empty() && ckpt_a == ckpt_b, "checkpoints differ");
  const CliRun e1 = cli(dir, "evaluate --bundle " + q(dir / "a"));
  const CliRun e2 = cli(dir, "evaluate --bundle " + q(dir / "a"));
  c.expect(e1.exit_code == 0 && e2.exit_code == 0, "evaluate exit codes");
  c.expect(!e1.out.empty() && e1.out == e2.out, "evaluate reports differ");
  return finish(c, "checkpoints " + std::to_string(ckpt_a.size()) + " bytes identical; reports " +
                       std::to_string(e1.out.size()) + " bytes identical");
}

}  // namespace

int main() {
  set_warnings_enabled(false);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"loss unit values", loss_values},
      {"ordinal encode/decode", encoding_roundtrip},
      {"metric oracle", metric_oracle},
      {"split protocol", split_protocol},
      {"fragmenter", fragmenter},
      {"synthetic overfit", synthetic_overfit},
      {"ensemble complementarity", ensemble_complementarity},
      {"tau-c", tau_c},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.passed) ++failed;
    std::cout << (o.passed ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
              << " [" << fmt(seconds_since(start), 1) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
