// SPDX-License-Identifier: Apache-2.0
#include "core/metrics.hpp"

#include <string>

#include "core/error.hpp"

namespace ordino {

namespace {

void check_inputs(std::span<const int> truth, std::span<const Prediction> preds, int k) {
  if (k < 2) fail(ErrorCode::InvalidArgument, "K must be at least 2");
  if (truth.empty() || truth.size() != preds.size()) {
    fail(ErrorCode::InvalidArgument, "metrics need equally many (>= 1) truths and predictions");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 1 || truth[i] > k) {
      fail(ErrorCode::LabelOutOfRange, "truth label " + std::to_string(truth[i]) + " outside 1.." + std::to_string(k));
    }
    if (preds[i] && (*preds[i] < 1 || *preds[i] > k)) {
      fail(ErrorCode::LabelOutOfRange, "predicted label " + std::to_string(*preds[i]) + " outside 1.." + std::to_string(k));
    }
  }
}

}  // namespace

int group3(int label) {
  if (label < 1 || label > 9) fail(ErrorCode::LabelOutOfRange, "group3 expects a label in 1..9");
  return (label + 2) / 3;
}

double macro_recall(std::span<const int> truth, std::span<const Prediction> preds, int k) {
  check_inputs(truth, preds, k);
  std::vector<long> support(static_cast<std::size_t>(k), 0);
  std::vector<long> correct(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto c = static_cast<std::size_t>(truth[i] - 1);
    ++support[c];
    if (preds[i] && *preds[i] == truth[i]) ++correct[c];
  }
  double sum = 0.0;
  int classes = 0;
  for (std::size_t c = 0; c < support.size(); ++c) {
    if (support[c] == 0) continue;
    sum += static_cast<double>(correct[c]) / static_cast<double>(support[c]);
    ++classes;
  }
  return 100.0 * sum / classes;
}

MetricsReport compute_metrics(std::span<const int> truth, std::span<const Prediction> preds, int k) {
  check_inputs(truth, preds, k);
  MetricsReport r;
  r.num_classes = k;
  r.samples = static_cast<long>(truth.size());
  r.confusion.assign(static_cast<std::size_t>(k), std::vector<long>(static_cast<std::size_t>(k), 0));
  r.per_class.resize(static_cast<std::size_t>(k));
  std::vector<double> sq(static_cast<std::size_t>(k), 0.0);
  std::vector<long> near(static_cast<std::size_t>(k), 0);
  std::vector<long> predicted_as(static_cast<std::size_t>(k), 0);
  const double penalty = static_cast<double>(k) * static_cast<double>(k);

  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto c = static_cast<std::size_t>(truth[i] - 1);
    auto& m = r.per_class[c];
    ++m.support;
    if (!preds[i]) {
      ++m.undefined;
      ++r.undefined_count;
      sq[c] += penalty;
      continue;
    }
    const int p = *preds[i];
    ++r.confusion[c][static_cast<std::size_t>(p - 1)];
    ++predicted_as[static_cast<std::size_t>(p - 1)];
    const int d = p - truth[i];
    if (d == 0) ++m.correct;
    if (d >= -1 && d <= 1) ++near[c];
    sq[c] += static_cast<double>(d) * d;
  }

  int classes = 0;
  const double n = static_cast<double>(r.samples);
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    auto& m = r.per_class[c];
    m.label = static_cast<int>(c) + 1;
    if (m.support == 0) continue;
    const double s = static_cast<double>(m.support);
    m.recall = static_cast<double>(m.correct) / s;
    m.umse = sq[c] / s;
    m.uacc_pm1 = static_cast<double>(near[c]) / s;
    r.acc_k += m.recall;
    r.acc_pm1 += m.uacc_pm1;
    r.mse += m.umse;
    const double tp = static_cast<double>(m.correct);
    const double fn = s - tp;
    const double fp = static_cast<double>(predicted_as[c]) - tp;
    const double tn = n - tp - fn - fp;
    r.acc_k_paper_formula += (tp + tn) / n;
    ++classes;
  }
  r.acc_k = 100.0 * r.acc_k / classes;
  r.acc_pm1 = 100.0 * r.acc_pm1 / classes;
  r.mse /= classes;
  r.acc_k_paper_formula = 100.0 * r.acc_k_paper_formula / classes;

  if (k == 3) {
    r.acc_3 = r.acc_k;
  } else if (k == 9) {
    std::vector<int> t3(truth.size());
    std::vector<Prediction> p3(preds.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      t3[i] = group3(truth[i]);
      if (preds[i]) p3[i] = group3(*preds[i]);
    }
    r.acc_3 = macro_recall(t3, p3, 3);
  }
  return r;
}

nlohmann::json metrics_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["num_classes"] = r.num_classes;
  j["samples"] = r.samples;
  j["acc_k"] = r.acc_k;
  j["acc_3"] = r.acc_3 ? nlohmann::json(*r.acc_3) : nlohmann::json(nullptr);
  j["acc_pm1"] = r.acc_pm1;
  j["mse"] = r.mse;
  j["acc_k_paper_formula"] = r.acc_k_paper_formula;
  j["undefined_count"] = r.undefined_count;
  j["confusion"] = r.confusion;
  auto& per = j["per_class"] = nlohmann::json::array();
  for (const auto& m : r.per_class) {
    per.push_back({{"label", m.label},
                   {"support", m.support},
                   {"correct", m.correct},
                   {"undefined", m.undefined},
                   {"recall", m.recall},
                   {"umse", m.umse},
                   {"uacc_pm1", m.uacc_pm1}});
  }
  return j;
}

}  // namespace ordino
