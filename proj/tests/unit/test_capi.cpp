// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <ordino/ordino.h>

#include <cstring>
#include <string>

#include <json.hpp>

#include "testkit.hpp"

using nlohmann::json;

namespace {

json take_json(char* text) {
  REQUIRE(text != nullptr);
  json j = json::parse(text);
  ordino_string_free(text);
  return j;
}

}  // namespace

TEST_CASE("C API: scores") {
  ordino_set_warnings(0);
  CHECK(std::strlen(ordino_version()) > 0);
  CHECK(std::string(ordino_status_name(ORDINO_LABEL_MISMATCH)) == "LabelMismatch");

  ordino_score* score = nullptr;
  REQUIRE(ordino_score_parse(testkit::fixture("two_voice.musicxml").c_str(), &score) == ORDINO_OK);
  CHECK(ordino_score_note_count(score) == 8);
  CHECK(ordino_score_measure_count(score) == 2);
  int pitch = 0;
  int hand = -1;
  int measure = -1;
  double onset = -1;
  double duration = -1;
  CHECK(ordino_score_note(score, 1, &pitch, &onset, &duration, &hand, &measure) == ORDINO_OK);
  CHECK(pitch == 64);
  CHECK(hand == 1);
  CHECK(onset == 0.0);
  CHECK(duration == 1.0);
  CHECK(ordino_score_note(score, 8, &pitch, nullptr, nullptr, nullptr, nullptr) == ORDINO_INVALID_ARGUMENT);
  char* text = nullptr;
  REQUIRE(ordino_score_to_json(score, &text) == ORDINO_OK);
  CHECK(take_json(text).at("notes").size() == 8);
  ordino_score_free(score);

  ordino_score* bad = nullptr;
  CHECK(ordino_score_parse(testkit::fixture("out_of_range.musicxml").c_str(), &bad) == ORDINO_OUT_OF_RANGE_PITCH);
  CHECK(bad == nullptr);
  CHECK(std::string(ordino_last_error()).find("piano range") != std::string::npos);
  CHECK(ordino_score_parse(nullptr, &bad) == ORDINO_INVALID_ARGUMENT);
}

TEST_CASE("C API: manifests and statistics") {
  ordino_set_warnings(0);
  testkit::TempDir dir;
  const auto labels = testkit::write_corpus(dir / "s", testkit::overfit_pieces(1));
  ordino_manifest* m = nullptr;
  REQUIRE(ordino_manifest_build((dir / "s").c_str(), labels.c_str(), 4, &m) == ORDINO_OK);
  CHECK(ordino_manifest_entry_count(m) == 32);
  CHECK(ordino_manifest_reject_count(m) == 0);
  double tau = 2;
  CHECK(ordino_manifest_tau_c(m, &tau) == ORDINO_OK);
  CHECK(tau >= -1.0);
  CHECK(tau <= 1.0);
  char* text = nullptr;
  REQUIRE(ordino_manifest_splits(m, "composer_level", 5, &text) == ORDINO_OK);
  CHECK(take_json(text).size() == 5);
  CHECK(ordino_manifest_splits(m, "by_title", 5, &text) == ORDINO_CONFIG_ERROR);
  REQUIRE(ordino_manifest_save(m, (dir / "m.jsonl").c_str()) == ORDINO_OK);
  ordino_manifest_free(m);
  REQUIRE(ordino_manifest_load((dir / "m.jsonl").c_str(), &m) == ORDINO_OK);
  CHECK(ordino_manifest_entry_count(m) == 32);
  REQUIRE(ordino_manifest_rejects_json(m, &text) == ORDINO_OK);
  CHECK(take_json(text).empty());
  ordino_manifest_free(m);
  CHECK(ordino_manifest_build((dir / "missing").c_str(), labels.c_str(), 4, &m) == ORDINO_IO_ERROR);

  const long x[] = {10, 20, 30, 40, 50};
  const long y[] = {1, 2, 3, 4, 5};
  CHECK(ordino_tau_c(x, y, 5, &tau) == ORDINO_OK);
  CHECK(tau == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ordino_tau_c(x, y, 1, &tau) == ORDINO_INSUFFICIENT_DATA);

  const int truth[] = {1, 2, 3, 3};
  const int preds[] = {1, 0, 3, 2};
  REQUIRE(ordino_metrics(truth, preds, 4, 3, &text) == ORDINO_OK);
  const json r = take_json(text);
  CHECK(r.at("undefined_count") == 1);
  CHECK(r.at("acc_3").get<double>() == doctest::Approx(50.0));
  const int out_of_range[] = {1, 7, 3, 3};
  CHECK(ordino_metrics(truth, out_of_range, 4, 3, &text) == ORDINO_LABEL_OUT_OF_RANGE);
}

TEST_CASE("C API: embeddings") {
  testkit::TempDir dir;
  const float values[] = {1, 2, 3, 4, 5, 6};
  REQUIRE(ordino_embedding_save((dir / "e.pemb").c_str(), values, 2, 3) == ORDINO_OK);
  float* data = nullptr;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  REQUIRE(ordino_embedding_load((dir / "e.pemb").c_str(), &data, &rows, &cols) == ORDINO_OK);
  CHECK(rows == 2);
  CHECK(cols == 3);
  CHECK(std::memcmp(data, values, sizeof(values)) == 0);
  ordino_embedding_free(data);
  testkit::write_text(dir / "bad.pemb", "PEMBxxxx");
  CHECK(ordino_embedding_load((dir / "bad.pemb").c_str(), &data, &rows, &cols) == ORDINO_FORMAT_ERROR);

  char* text = nullptr;
  REQUIRE(ordino_synth_embed(testkit::fixture("two_voice.musicxml").c_str(), dir.path().c_str(), "tv", 6, 3, nullptr,
                             &text) == ORDINO_OK);
  CHECK(take_json(text).at("files").size() == 3);
  REQUIRE(ordino_embedding_load((dir / "tv.argnn.lh.pemb").c_str(), &data, &rows, &cols) == ORDINO_OK);
  CHECK(rows == 4);
  CHECK(cols == 6);
  ordino_embedding_free(data);
  REQUIRE(ordino_embedding_load((dir / "tv.virtuoso.pemb").c_str(), &data, &rows, &cols) == ORDINO_OK);
  CHECK(rows == 8);
  CHECK(cols == 64);
  ordino_embedding_free(data);
}

TEST_CASE("C API: train, evaluate, predict") {
  ordino_set_warnings(0);
  testkit::TempDir dir;
  const auto labels = testkit::write_corpus(dir / "s", testkit::overfit_pieces(2));
  ordino_manifest* m = nullptr;
  REQUIRE(ordino_manifest_build((dir / "s").c_str(), labels.c_str(), 4, &m) == ORDINO_OK);
  REQUIRE(ordino_manifest_save(m, (dir / "m.jsonl").c_str()) == ORDINO_OK);
  ordino_manifest_free(m);

  const json config{{"manifest", "m.jsonl"}, {"out", "bundle"}, {"hidden", 3}, {"layers", 1},
                    {"max_epochs", 1}, {"seed", 4}, {"single_thread", true}, {"loss", "coral"}};
  char* text = nullptr;
  REQUIRE(ordino_train(config.dump().c_str(), dir.path().c_str(), &text) == ORDINO_OK);
  CHECK(take_json(text).at("epochs_run") == 1);
  CHECK(ordino_train(R"({"manifest": "m.jsonl", "bogus": 1})", dir.path().c_str(), &text) == ORDINO_CONFIG_ERROR);
  CHECK(ordino_train("{not json", dir.path().c_str(), &text) == ORDINO_CONFIG_ERROR);

  REQUIRE(ordino_evaluate((dir / "bundle").c_str(), R"({"subset": "val", "single_thread": true})", &text) == ORDINO_OK);
  CHECK(take_json(text).at("subset") == "val");

  const std::string b = (dir / "bundle").string();
  const char* bundles[] = {b.c_str()};
  REQUIRE(ordino_ensemble(bundles, 1, nullptr, &text) == ORDINO_OK);
  CHECK(take_json(text).at("bundles") == 1);

  ordino_model* model = nullptr;
  REQUIRE(ordino_model_load(b.c_str(), &model) == ORDINO_OK);
  CHECK(ordino_model_num_classes(model) == 4);
  REQUIRE(ordino_model_predict(model, testkit::fixture("two_voice.musicxml").c_str(), nullptr, &text) == ORDINO_OK);
  const json p = take_json(text);
  CHECK(p.at("n_notes") == 8);
  CHECK(p.at("distribution").size() == 4);
  ordino_model_free(model);
  CHECK(ordino_model_load((dir / "nothing").c_str(), &model) == ORDINO_CONFIG_ERROR);
}

TEST_CASE("C API: gradient check") {
  char* text = nullptr;
  int passed = 0;
  REQUIRE(ordino_gradcheck(R"({"filter": "pitch/none/nll"})", &text, &passed) == ORDINO_OK);
  CHECK(passed == 1);
  const json j = take_json(text);
  CHECK(j.at("cases").size() == 1);
}
