// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "core/error.hpp"
#include "core/losses.hpp"
#include "core/nn/layers.hpp"

using namespace ordino;

namespace {

Matrix row(std::initializer_list<double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) m(0, i++) = v;
  return m;
}

Matrix log_of(const Matrix& m) { return m.array().log().matrix(); }

double bce(double t, double p) { return -(t * std::log(p) + (1 - t) * std::log(1 - p)); }

}  // namespace

TEST_CASE("label encodings") {
  CHECK(ordinal_encode(3, 9).values == std::vector<double>{1, 1, 1, 0, 0, 0, 0, 0, 0});
  CHECK(ordinal_encode(1, 9).values == std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(ordinal_encode(9, 9).values == std::vector<double>(9, 1.0));
  CHECK(one_hot_encode(2, 3).values == std::vector<double>{0, 1, 0});
  CHECK(coral_encode(3, 5).values == std::vector<double>{1, 1, 0, 0});
  CHECK_THROWS_AS(ordinal_encode(0, 9), Error);
  CHECK_THROWS_AS(ordinal_encode(10, 9), Error);

  const double c = std::exp(-2.0);
  const auto s5 = smoothed_encode(5, 9);
  CHECK(s5.values.size() == 9);
  for (int k = 0; k < 9; ++k) {
    const double expected = k == 4 ? 1.0 : (k == 3 || k == 5) ? c : 0.0;
    CHECK(std::abs(s5.values[static_cast<std::size_t>(k)] - expected) <= 1e-12);
  }
  const auto s1 = smoothed_encode(1, 9);
  CHECK(s1.values[0] == 1.0);
  CHECK(std::abs(s1.values[1] - c) <= 1e-12);
  CHECK(s1.values[2] == 0.0);
}

TEST_CASE("coral targets are the shifted ordinal encoding") {
  for (int k = 2; k <= 12; ++k) {
    for (int y = 1; y <= k; ++y) {
      const auto o = ordinal_encode(y, k).values;
      const auto c = coral_encode(y, k).values;
      REQUIRE(c.size() == static_cast<std::size_t>(k - 1));
      for (int j = 0; j < k - 1; ++j) CHECK(c[static_cast<std::size_t>(j)] == o[static_cast<std::size_t>(j + 1)]);
    }
  }
}

TEST_CASE("ordinal decoding") {
  const std::vector<double> broken{1, 0, 0, 0, 1, 0, 0, 0, 0};
  CHECK_FALSE(ordinal_decode(broken).has_value());
  const std::vector<double> soft{0.9, 0.8, 0.6, 0.4, 0.3, 0.2, 0.1, 0.1, 0.0};
  CHECK(ordinal_decode(soft) == 3);
  const std::vector<double> low(9, 0.4);
  CHECK_FALSE(ordinal_decode(low).has_value());
  for (int k = 2; k <= 12; ++k) {
    for (int y = 1; y <= k; ++y) CHECK(ordinal_decode(ordinal_encode(y, k).values) == y);
  }
}

TEST_CASE("coral decoding uses the count rule") {
  auto logit = [](double p) { return std::log(p / (1 - p)); };
  const std::vector<double> b{logit(0.9), logit(0.7), logit(0.2), logit(0.1)};
  CHECK(coral_decode(0.0, b) == 3);
  const std::vector<double> low(8, -3.0);
  CHECK(coral_decode(0.0, low) == 1);
  const std::vector<double> high(8, 3.0);
  CHECK(coral_decode(0.0, high) == 9);
  const std::vector<double> unsorted{-1.0, 2.0, -3.0, 1.0};
  CHECK(coral_decode(0.0, unsorted) == 3);
}

TEST_CASE("NLL") {
  const std::vector<int> label1{1};
  CHECK(nll_loss(log_of(row({0.5, 0.25, 0.25})), label1) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(std::abs(nll_loss(log_of(row({1.0, 1e-300, 1e-300})), label1)) <= 1e-12);
  Matrix two(2, 3);
  two << row({0.2, 0.5, 0.3}), row({0.2, 0.5, 0.3});
  two = log_of(two);
  const std::vector<int> labels{2, 2};
  const std::vector<int> one{2};
  CHECK(nll_loss(two, labels) == doctest::Approx(nll_loss(two.topRows(1), one)).epsilon(1e-15));
}

TEST_CASE("RegClass") {
  const Matrix lp = log_of(row({0.5, 0.25, 0.25}));
  const std::vector<int> label1{1};
  const std::vector<double> pred{1.5};
  CHECK(regclass_loss(lp, pred, label1, 1.0) == doctest::Approx(0.943147).epsilon(1e-6));
  CHECK(regclass_loss(lp, pred, label1, 0.0) == nll_loss(lp, label1));
  const std::vector<double> exact{1.0};
  CHECK(std::abs(regclass_loss(log_of(row({1.0, 1e-300, 1e-300})), exact, label1, 1.0)) <= 1e-12);
}

TEST_CASE("MSmooth") {
  const auto target = smoothed_encode(5, 9).values;
  const Matrix probs = Eigen::Map<const Eigen::RowVectorXd>(target.data(), 9);
  const std::vector<int> label{5};
  double optimum = 0.0;
  for (double t : target) {
    const double p = std::clamp(t, kProbabilityClamp, 1.0 - kProbabilityClamp);
    optimum += bce(t, p);
  }
  CHECK(msmooth_loss(probs, label) <= optimum + 1e-6);
  // Any other prediction is worse.
  Matrix worse = probs;
  worse(0, 4) = 0.8;
  CHECK(msmooth_loss(worse, label) > msmooth_loss(probs, label));
  CHECK(target[3] == doctest::Approx(0.1353).epsilon(1e-4));
  CHECK(std::abs(target[3] - std::exp(-2.0)) <= 1e-6);
}

TEST_CASE("Ordinal loss") {
  const std::vector<int> two{2};
  CHECK(ordinal_loss(row({1.0, 0.0}), two) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(ordinal_loss(row({1.0, 1.0}), two) == 0.0);
  const std::vector<int> label{6};
  CHECK(ordinal_loss(Matrix::Constant(1, 9, 0.5), label) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("CORAL loss") {
  const std::vector<double> g0{0.0};
  const std::vector<double> b0{0.0, 0.0};
  const std::vector<int> two{2};
  CHECK(coral_loss(g0, b0, two) == doctest::Approx(1.386294).epsilon(1e-6));
  const std::vector<double> g30{30.0};
  const std::vector<double> b8(8, 0.0);
  const std::vector<int> nine{9};
  CHECK(coral_loss(g30, b8, nine) <= 1e-9);
  const std::vector<double> lambda{2.0, 0.5};
  const std::vector<int> three{3};
  CHECK(coral_loss(g0, b0, three, lambda) == doctest::Approx(2.5 * std::log(2.0)).epsilon(1e-12));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<double> biases(5);
  for (double& b : biases) b = n(rng);
  for (int trial = 0; trial < 100; ++trial) {
    double g1 = n(rng);
    double g2 = n(rng);
    if (g1 == g2) continue;
    if (g1 < g2) std::swap(g1, g2);
    for (double b : biases) CHECK(nn::sigmoid(g1 + b) > nn::sigmoid(g2 + b));
  }
}

TEST_CASE("class weights") {
  const std::vector<int> labels{1, 1, 1, 2, 3, 3};
  const auto w = class_weights(labels, 4);
  REQUIRE(w.size() == 4);
  CHECK(w[0] == doctest::Approx(6.0 / (4 * 3)));
  CHECK(w[1] == doctest::Approx(6.0 / 4));
  CHECK(w[2] == doctest::Approx(6.0 / 8));
  CHECK(w[3] == 0.0);
}

TEST_CASE("weighted losses scale with the weights") {
  const Matrix lp = log_of(row({0.2, 0.5, 0.3}));
  const std::vector<int> label{3};
  const std::vector<double> w1{0.7};
  const std::vector<double> w3{2.1};
  CHECK(nll_loss(lp, label, w3) == doctest::Approx(3 * nll_loss(lp, label, w1)).epsilon(1e-12));
  const Matrix p = row({0.2, 0.5, 0.3});
  CHECK(msmooth_loss(p, label, 0.5, w3) == doctest::Approx(3 * msmooth_loss(p, label, 0.5, w1)).epsilon(1e-12));
  const std::vector<double> s{2.5};
  CHECK(regclass_loss(lp, s, label, 0.5, w3) == doctest::Approx(3 * regclass_loss(lp, s, label, 0.5, w1)).epsilon(1e-12));
}

TEST_CASE("distributions from heads") {
  const std::vector<double> exceed{0.9, 0.6, 0.2};
  const Vector p = probs_from_exceedance(exceed, 4);
  CHECK(p(0) == doctest::Approx(0.1));
  CHECK(p(1) == doctest::Approx(0.3));
  CHECK(p(2) == doctest::Approx(0.4));
  CHECK(p(3) == doctest::Approx(0.2));

  const std::vector<double> bent{0.2, 0.9};
  const Vector q = probs_from_exceedance(bent, 3);
  CHECK(q(0) == doctest::Approx(0.8 / 1.7));
  CHECK(q(1) == 0.0);
  CHECK(q(2) == doctest::Approx(0.9 / 1.7));

  HeadOutput soft{HeadKind::Nll, 3, Vector::Zero(3), 0.0};
  soft.logits << std::log(0.2), std::log(0.5), std::log(0.3);
  const Vector s = probs_from_head(soft);
  CHECK(s(0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(s(1) == doctest::Approx(0.5).epsilon(1e-12));

  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 4.0);
  for (HeadKind kind : {HeadKind::Nll, HeadKind::RegClass, HeadKind::MSmooth, HeadKind::Ordinal, HeadKind::Coral}) {
    for (int trial = 0; trial < 50; ++trial) {
      HeadOutput out{kind, 6, Vector(kind == HeadKind::Coral ? 5 : 6), 0.0};
      for (Eigen::Index i = 0; i < out.logits.size(); ++i) out.logits(i) = n(rng);
      const Vector d = probs_from_head(out);
      REQUIRE(d.size() == 6);
      CHECK(std::abs(d.sum() - 1.0) <= 1e-9);
      CHECK(d.minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("decoding model heads") {
  HeadOutput nll{HeadKind::Nll, 3, Vector::Zero(3), 0.0};
  CHECK(decode_head(nll) == 1);
  nll.logits << 0.1, 2.0, 2.0;
  CHECK(decode_head(nll) == 2);
  HeadOutput ord{HeadKind::Ordinal, 4, Vector(4), 0.0};
  ord.logits << 3.0, 3.0, -3.0, -3.0;
  CHECK(decode_head(ord) == 2);
  ord.logits << 3.0, -3.0, 3.0, -3.0;
  CHECK_FALSE(decode_head(ord).has_value());
  HeadOutput coral{HeadKind::Coral, 4, Vector(3), 0.0};
  coral.logits << 1.0, 1.0, -1.0;
  CHECK(decode_head(coral) == 3);
  const std::vector<double> tie{0.3, 0.3, 0.3};
  CHECK(argmax_lowest(tie) == 0);
}

TEST_CASE("per-sample head losses agree with the batch criteria") {
  const LossOptions opts;
  HeadOutput out{HeadKind::Coral, 3, Vector::Zero(2), 0.0};
  CHECK(head_sample_loss(out, 2, 1.0, opts, nullptr) == doctest::Approx(1.386294).epsilon(1e-6));
  out = {HeadKind::Ordinal, 2, Vector(2), 0.0};
  out.logits << 40.0, -40.0;
  CHECK(head_sample_loss(out, 2, 1.0, opts, nullptr) == doctest::Approx(0.5).epsilon(1e-6));
  out = {HeadKind::RegClass, 3, Vector(3), 1.5};
  out.logits << std::log(0.5), std::log(0.25), std::log(0.25);
  CHECK(head_sample_loss(out, 1, 1.0, opts, nullptr) == doctest::Approx(0.943147).epsilon(1e-6));
  CHECK(head_sample_loss(out, 1, 2.0, opts, nullptr) == doctest::Approx(2 * 0.943147).epsilon(1e-6));
  CHECK_THROWS_AS(head_sample_loss(out, 4, 1.0, opts, nullptr), Error);
}
