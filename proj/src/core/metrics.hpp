// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace ordino {

// A decoded level in 1..K, or nullopt for an undefined ordinal decode.
using Prediction = std::optional<int>;

struct ClassMetrics {
  int label = 1;
  long support = 0;
  long correct = 0;
  long undefined = 0;
  double recall = 0.0;    // fraction
  double umse = 0.0;      // mean squared level error over the class
  double uacc_pm1 = 0.0;  // fraction within one level
};

// Accuracies are percentages; macro means run over classes with support > 0.
struct MetricsReport {
  int num_classes = 0;
  long samples = 0;
  double acc_k = 0.0;
  std::optional<double> acc_3;  // only for K = 9 (grouped) or K = 3 (native)
  double acc_pm1 = 0.0;
  double mse = 0.0;
  double acc_k_paper_formula = 0.0;  // mean over classes of (TP + TN) / n
  std::vector<ClassMetrics> per_class;
  std::vector<std::vector<long>> confusion;  // truth row, prediction column
  long undefined_count = 0;
};

// Undefined predictions count as wrong and add K^2 to their class's squared error.
// Errors: LabelOutOfRange, InvalidArgument (empty or mismatched inputs).
MetricsReport compute_metrics(std::span<const int> truth, std::span<const Prediction> preds,
                              int num_classes);

// ceil(label / 3) for labels 1..9. Errors: LabelOutOfRange.
int group3(int label);

// Macro-averaged recall (percent) over supported classes.
double macro_recall(std::span<const int> truth, std::span<const Prediction> preds, int num_classes);

nlohmann::json metrics_to_json(const MetricsReport& report);

}  // namespace ordino
