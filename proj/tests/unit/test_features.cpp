// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstring>
#include <random>

#include "core/error.hpp"
#include "core/features.hpp"
#include "core/pemb.hpp"
#include "core/synth.hpp"
#include "testkit.hpp"

using namespace ordino;

namespace {

NoteSequence notes_of(std::vector<int> pitches) {
  NoteSequence seq;
  seq.piece_id = "s";
  seq.n_measures = 1;
  long t = 0;
  for (int p : pitches) {
    Note n;
    n.midi_pitch = p;
    n.onset = Rational(t++);
    n.duration = Rational(1);
    seq.notes.push_back(n);
  }
  return seq;
}

std::string pemb_bytes(std::uint32_t t, std::uint32_t d, std::vector<float> values) {
  std::string s = "PEMB";
  for (std::uint32_t v : {1U, t, d}) {
    for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
  }
  for (float f : values) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
  return s;
}

ErrorCode decode_code(const std::string& bytes) {
  try {
    decode_embedding(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

}  // namespace

TEST_CASE("pitch tokens") {
  auto seq = pitch_tokens(notes_of({60, 64, 67}));
  REQUIRE(seq.branches.size() == 1);
  CHECK(seq.branches[0].rows() == 3);
  CHECK(seq.branches[0](0, 0) == 39);
  CHECK(seq.branches[0](1, 0) == 43);
  CHECK(seq.branches[0](2, 0) == 46);
  CHECK(pitch_tokens(notes_of({21})).branches[0](0, 0) == 0);
  CHECK(pitch_tokens(notes_of({108})).branches[0](0, 0) == 87);
  CHECK_THROWS_AS(pitch_tokens(notes_of({})), Error);
}

TEST_CASE("PEMB decoding") {
  const auto m = decode_embedding(pemb_bytes(2, 3, {1, 2, 3, 4, 5, 6}));
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 3);
  CHECK(m(0, 0) == 1.0F);
  CHECK(m(0, 2) == 3.0F);
  CHECK(m(1, 0) == 4.0F);
  CHECK(m(1, 2) == 6.0F);
  CHECK(decode_code(pemb_bytes(2, 3, {1, 2, 3, 4, 5})) == ErrorCode::SizeMismatch);
  std::string bad = pemb_bytes(1, 1, {1});
  bad[0] = 'X';
  CHECK(decode_code(bad) == ErrorCode::FormatError);
  std::string version = pemb_bytes(1, 1, {1});
  version[4] = 2;
  CHECK(decode_code(version) == ErrorCode::FormatError);
  CHECK(decode_code(pemb_bytes(1, 2, {1, std::numeric_limits<float>::quiet_NaN()})) == ErrorCode::NonFiniteValue);
  CHECK(decode_code("PEM") == ErrorCode::FormatError);
}

TEST_CASE("PEMB save/load is bit-exact") {
  testkit::TempDir dir;
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g(0.0F, 10.0F);
  EmbeddingMatrix m(100, 64);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  save_embedding(dir / "m.pemb", m);
  const auto back = load_embedding(dir / "m.pemb");
  REQUIRE(back.rows() == 100);
  REQUIRE(back.cols() == 64);
  CHECK(std::memcmp(back.data(), m.data(), sizeof(float) * static_cast<std::size_t>(m.size())) == 0);
  CHECK(encode_embedding(back) == read_file_bytes(dir / "m.pemb"));
}

TEST_CASE("align concatenates per note") {
  Matrix a = Matrix::Random(4, 2);
  Matrix b = Matrix::Random(4, 3);
  const auto j = align(embedding_sequence(RepName::VirtuosoEnc, {a}), embedding_sequence(RepName::VirtuosoEnc, {b}));
  REQUIRE(j.branches[0].rows() == 4);
  CHECK(j.branches[0].cols() == 5);
  CHECK(j.branches[0](2, 3) == b(2, 1));
  Matrix c = Matrix::Random(5, 3);
  CHECK_THROWS_AS(align(embedding_sequence(RepName::VirtuosoEnc, {a}), embedding_sequence(RepName::VirtuosoEnc, {c})),
                  Error);
}

TEST_CASE("argnn hands interleave back into note order") {
  Matrix right(2, 2);
  right << 1, 1, 3, 3;
  Matrix left(2, 2);
  left << 2, 2, 4, 4;
  const std::vector<Hand> tags{Hand::Right, Hand::Left, Hand::Right, Hand::Left};
  const auto argnn = embedding_sequence(RepName::Argnn, {right, left}, tags);
  Matrix v(4, 64);
  for (int r = 0; r < 4; ++r) v.row(r).setConstant(10 + r);
  const auto joined = align(argnn, embedding_sequence(RepName::Virtuoso, {v}));
  const Matrix& m = joined.branches[0];
  REQUIRE(m.cols() == 66);
  // Replay the canonical order: right and left rows taken in turn.
  int r = 0;
  int l = 0;
  for (int t = 0; t < 4; ++t) {
    const double expected = tags[static_cast<std::size_t>(t)] == Hand::Right ? right(r++, 0) : left(l++, 0);
    CHECK(m(t, 0) == expected);
    CHECK(m(t, 1) == expected);
    CHECK(m(t, 2) == 10 + t);
  }
  CHECK_THROWS_AS(embedding_sequence(RepName::Argnn, {right, left}, {Hand::Right, Hand::Left, Hand::Left, Hand::Left}),
                  Error);
  CHECK_THROWS_AS(embedding_sequence(RepName::Virtuoso, {Matrix::Zero(4, 63)}), Error);
}

TEST_CASE("fragment spans") {
  const auto a = fragment_spans(640);
  REQUIRE(a.size() == 3);
  CHECK(a[0] == FragmentSpan{0, 256});
  CHECK(a[1] == FragmentSpan{192, 256});
  CHECK(a[2] == FragmentSpan{384, 256});
  const auto b = fragment_spans(100);
  REQUIRE(b.size() == 1);
  CHECK(b[0] == FragmentSpan{0, 100});
  const auto c = fragment_spans(700);
  REQUIRE(c.size() == 4);
  CHECK(c[3] == FragmentSpan{444, 256});
  const auto f = fragment("p", 4, 640);
  REQUIRE(f.size() == 3);
  CHECK(f[2].label == 4);
  CHECK(f[2].piece_id == "p");
  CHECK_THROWS_AS(fragment_spans(10, 0), Error);
  CHECK_THROWS_AS(fragment_spans(10, 4, 1.0), Error);
}

TEST_CASE("slicing keeps hands consistent") {
  Matrix right = Matrix::Random(3, 2);
  Matrix left = Matrix::Random(2, 2);
  const std::vector<Hand> tags{Hand::Right, Hand::Left, Hand::Right, Hand::Right, Hand::Left};
  const auto seq = embedding_sequence(RepName::Argnn, {right, left}, tags);
  const auto s = slice(seq, 1, 3);
  CHECK(s.length() == 3);
  CHECK(s.branches[0].rows() == 2);
  CHECK(s.branches[1].rows() == 1);
  CHECK(s.branches[1](0, 0) == left(0, 0));
  CHECK(s.branches[0](0, 0) == right(1, 0));
  CHECK_THROWS_AS(slice(seq, 3, 3), Error);
}

TEST_CASE("synthetic embeddings are deterministic and hand-restricted") {
  const auto seq = parse_musicxml(testkit::fixture("two_voice.musicxml"));
  const auto a = synth_embedding(seq, 16, 7, 1);
  const auto b = synth_embedding(seq, 16, 7, 1);
  const auto c = synth_embedding(seq, 16, 8, 1);
  CHECK(a.rows() == 8);
  CHECK(a.cols() == 16);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.maxCoeff() <= 1.0F);
  CHECK(a.minCoeff() >= -1.0F);
  const Hand right = Hand::Right;
  CHECK(synth_embedding(seq, 4, 7, 2, &right).rows() == 4);
}
