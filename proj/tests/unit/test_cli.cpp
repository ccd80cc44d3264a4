// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "core/score.hpp"
#include "testkit.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Run run(const testkit::TempDir& dir, const std::string& args, const std::string& env = "") {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = "env -u ORDINO_SEED " + env + " " + quote(ORDINO_CLI_PATH) + " " + args + " >" +
                          quote(out.string()) + " 2>" + quote(err.string());
  const int status = std::system(cmd.c_str());
  Run r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = ordino::read_file_bytes(out);
  r.err = ordino::read_file_bytes(err);
  return r;
}

std::string p(const fs::path& path) { return quote(path.string()); }

std::vector<testkit::Piece> five_pieces() {
  auto pieces = testkit::overfit_pieces(9);
  pieces.resize(5);
  return pieces;
}

json error_json(const Run& r) {
  const auto start = r.err.rfind("{\"error\"");
  REQUIRE(start != std::string::npos);
  return json::parse(r.err.substr(start));
}

struct Corpus {
  testkit::TempDir dir;
  fs::path labels;
  fs::path manifest;
  Corpus() {
    labels = testkit::write_corpus(dir / "scores", testkit::overfit_pieces(4));
    manifest = dir / "m.jsonl";
    const Run r = run(dir, "ingest --scores " + p(dir / "scores") + " --labels " + p(labels) + " --out " + p(manifest) + " -K 4");
    REQUIRE(r.exit_code == 0);
  }
  std::string train_args(const std::string& out) const {
    return "train --manifest " + p(manifest) + " --out " + p(dir / out) +
           " --hidden 3 --layers 1 --max-epochs 2 --batch-size 8 --lr 0.01";
  }
};

}  // namespace

TEST_CASE("ingest") {
  testkit::TempDir dir;
  const auto labels = testkit::write_corpus(dir / "scores", five_pieces());
  Run r = run(dir, "ingest --scores " + p(dir / "scores") + " --labels " + p(labels) + " --out " + p(dir / "m.jsonl"));
  CHECK(r.exit_code == 0);
  CHECK(json::parse(r.out).at("entries") == 5);

  r = run(dir, "ingest --scores " + p(dir / "scores") + " --labels " + p(dir / "nope.jsonl") + " --out " + p(dir / "x.jsonl"));
  CHECK(r.exit_code == 2);
  CHECK(error_json(r).at("exit_code") == 2);

  r = run(dir, "ingest --scores " + p(dir / "scores") + " --out " + p(dir / "x.jsonl"));
  CHECK(r.exit_code == 2);

  testkit::write_text(dir / "scores" / "ov101.musicxml", "<score-partwise>");
  r = run(dir, "ingest --scores " + p(dir / "scores") + " --labels " + p(labels) + " --out " + p(dir / "m2.jsonl"));
  CHECK(r.exit_code == 0);
  CHECK(json::parse(r.out).at("entries") == 4);
  CHECK(json::parse(r.out).at("rejects") == 1);
  CHECK(fs::exists(dir / "m2.rejects.jsonl"));
  CHECK(r.err.find("ov101") != std::string::npos);

  std::ofstream(labels, std::ios::app) << R"({"piece_id": "ghost", "label": 1})" << "\n";
  r = run(dir, "ingest --scores " + p(dir / "scores") + " --labels " + p(labels) + " --out " + p(dir / "m3.jsonl"));
  CHECK(r.exit_code == 3);
  CHECK(error_json(r).at("error") == "LabelMismatch");
  CHECK(error_json(r).at("message").get<std::string>().find("ghost") != std::string::npos);
}

TEST_CASE("usage errors") {
  testkit::TempDir dir;
  CHECK(run(dir, "").exit_code == 2);
  CHECK(run(dir, "frobnicate").exit_code == 2);
  CHECK(run(dir, "evaluate").exit_code == 2);
  const Run r = run(dir, "evaluate --bundle " + p(dir / "missing"));
  CHECK(r.exit_code == 2);
  CHECK(error_json(r).at("error") == "UsageError");
}

TEST_CASE("split honours ORDINO_SEED") {
  Corpus c;
  const Run a = run(c.dir, "split --manifest " + p(c.manifest), "ORDINO_SEED=42");
  const Run b = run(c.dir, "split --manifest " + p(c.manifest) + " --seed 42");
  const Run d = run(c.dir, "split --manifest " + p(c.manifest) + " --seed 43");
  REQUIRE(a.exit_code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != d.out);
  CHECK(json::parse(a.out).size() == 5);
  CHECK(run(c.dir, "split --manifest " + p(c.manifest), "ORDINO_SEED=abc").exit_code == 2);
  CHECK(run(c.dir, "split --manifest " + p(c.manifest) + " --strategy by_title").exit_code == 2);
}

TEST_CASE("train, evaluate, ensemble, predict") {
  Corpus c;
  Run r = run(c.dir, c.train_args("b1"), "ORDINO_SEED=7");
  REQUIRE(r.exit_code == 0);
  const json config = json::parse(ordino::read_file_bytes(c.dir / "b1" / "config.json"));
  CHECK(config.at("experiment").at("seed") == 7);
  CHECK(config.at("experiment").at("hidden") == 3);

  testkit::write_text(c.dir / "cfg.json", json{{"manifest", "m.jsonl"}, {"loss", "ordinal"}, {"seed", 7}, {"hidden", 9}}.dump());
  r = run(c.dir, "train --config " + p(c.dir / "cfg.json") + " --out " + p(c.dir / "b2") +
                     " --hidden 3 --layers 1 --max-epochs 1", "ORDINO_SEED=8");
  REQUIRE(r.exit_code == 0);
  const json config2 = json::parse(ordino::read_file_bytes(c.dir / "b2" / "config.json"));
  CHECK(config2.at("experiment").at("seed") == 7);
  CHECK(config2.at("experiment").at("hidden") == 3);
  CHECK(config2.at("experiment").at("loss") == "ordinal");

  testkit::write_text(c.dir / "bad.json", R"({"manifest": "m.jsonl", "learning_rate": 3})");
  CHECK(run(c.dir, "train --config " + p(c.dir / "bad.json") + " --out " + p(c.dir / "b3")).exit_code == 2);

  r = run(c.dir, "evaluate --bundle " + p(c.dir / "b1"));
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report.at("metrics").contains("acc_k"));
  CHECK(report.at("metrics").contains("undefined_count"));

  r = run(c.dir, "ensemble --bundles " + p(c.dir / "b1") + "," + p(c.dir / "b2"));
  REQUIRE(r.exit_code == 0);
  const json e = json::parse(r.out);
  CHECK(e.at("members").size() == 2);
  const Run swapped = run(c.dir, "ensemble --bundles " + p(c.dir / "b2") + "," + p(c.dir / "b1"));
  REQUIRE(swapped.exit_code == 0);
  CHECK(json::parse(swapped.out).at("ensemble") == e.at("ensemble"));

  r = run(c.dir, "predict --bundle " + p(c.dir / "b1") + " --score " + p(testkit::fixture("two_voice.musicxml")));
  REQUIRE(r.exit_code == 0);
  const json pred = json::parse(r.out);
  CHECK(pred.at("level").get<int>() >= 1);
  CHECK(pred.at("level").get<int>() <= 4);

  r = run(c.dir, "predict --bundle " + p(c.dir / "b1") + " --score " + p(testkit::fixture("malformed.musicxml")));
  CHECK(r.exit_code == 3);
  CHECK(error_json(r).at("error") == "ParseError");
}

TEST_CASE("embedding-backed models need their embeddings") {
  Corpus c;
  Run r = run(c.dir, "synth-embed --scores " + p(c.dir / "scores") + " --dim 5 --seed 2");
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(c.dir / "scores" / "ov100.argnn.rh.pemb"));
  r = run(c.dir, "ingest --scores " + p(c.dir / "scores") + " --labels " + p(c.labels) + " --out " + p(c.manifest) + " -K 4");
  REQUIRE(r.exit_code == 0);
  r = run(c.dir, c.train_args("argnn") + " --rep argnn --seed 1");
  REQUIRE(r.exit_code == 0);

  r = run(c.dir, "predict --bundle " + p(c.dir / "argnn") + " --score " + p(c.dir / "scores" / "ov100.musicxml"));
  CHECK(r.exit_code == 2);
  CHECK(error_json(r).at("message").get<std::string>().find("argnn") != std::string::npos);

  r = run(c.dir, "predict --bundle " + p(c.dir / "argnn") + " --score " + p(c.dir / "scores" / "ov100.musicxml") +
                     " --embedding argnn.rh=" + p(c.dir / "scores" / "ov100.argnn.rh.pemb") +
                     " --embedding argnn.lh=" + p(c.dir / "scores" / "ov100.argnn.lh.pemb"));
  CHECK(r.exit_code == 0);
  CHECK(json::parse(r.out).at("attention").size() == 2);

  r = run(c.dir, "synth-embed --score " + p(c.dir / "scores" / "ov101.musicxml") + " --out-dir " + p(c.dir / "e") +
                     " --reps virtuoso");
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(c.dir / "e" / "ov101.virtuoso.pemb"));
  CHECK_FALSE(fs::exists(c.dir / "e" / "ov101.argnn.rh.pemb"));
}

TEST_CASE("gradcheck command") {
  testkit::TempDir dir;
  Run r = run(dir, "gradcheck --filter virtuoso_enc/none");
  CHECK(r.exit_code == 0);
  CHECK(json::parse(r.out).at("cases").size() == 5);
  r = run(dir, "gradcheck --filter no-such-case");
  CHECK(r.exit_code == 1);
}
