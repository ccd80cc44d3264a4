// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "core/nn/parameter.hpp"

namespace ordino {

using nn::Matrix;
using nn::Vector;

enum class HeadKind { Nll, RegClass, MSmooth, Ordinal, Coral };

std::string_view head_kind_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view text);  // nll | regclass | msmooth | ordinal | coral

// ---------------------------------------------------------------------------
// Label encodings. Labels are 1-based levels in 1..K.

enum class EncodingKind { OneHot, Smoothed, Ordinal, CoralBinary, Scalar };

struct LabelEncoding {
  EncodingKind kind = EncodingKind::OneHot;
  int num_classes = 0;
  std::vector<double> values;
};

LabelEncoding one_hot_encode(int label, int num_classes);
// Gaussian around the label, peak 1, truncated to the two neighbouring levels.
LabelEncoding smoothed_encode(int label, int num_classes, double sigma = 0.5);
// First `label` entries are 1.
LabelEncoding ordinal_encode(int label, int num_classes);
// Entry k (k = 1..K-1) is 1{label > k}.
LabelEncoding coral_encode(int label, int num_classes);

// Binarize at threshold; a non-empty contiguous prefix of ones decodes to its length,
// anything else is undefined (nullopt).
std::optional<int> ordinal_decode(std::span<const double> pred, double threshold = 0.5);
// 1 + number of sigmoid(g + b_k) above threshold.
int coral_decode(double logit_g, std::span<const double> biases, double threshold = 0.5);

// w_c = N / (K * N_c); classes without samples get 0.
std::vector<double> class_weights(std::span<const int> labels, int num_classes);

// ---------------------------------------------------------------------------
// Batch criteria. Row i of a matrix is sample i. Empty weight spans mean weight 1.

double nll_loss(const Matrix& log_probs, std::span<const int> labels,
                std::span<const double> weights = {});
double regclass_loss(const Matrix& log_probs, std::span<const double> scalar_pred,
                     std::span<const int> labels, double alpha = 1.0,
                     std::span<const double> weights = {});
// Predictions are clamped into [1e-7, 1 - 1e-7] before the logarithms.
double msmooth_loss(const Matrix& probs, std::span<const int> labels, double sigma = 0.5,
                    std::span<const double> weights = {});
double ordinal_loss(const Matrix& pred, std::span<const int> labels);
double coral_loss(std::span<const double> logit_g, std::span<const double> biases,
                  std::span<const int> labels, std::span<const double> task_weights = {});

constexpr double kProbabilityClamp = 1e-7;

// ---------------------------------------------------------------------------
// Model heads: pre-activation outputs and their per-sample loss/gradient.

struct LossOptions {
  double alpha = 1.0;
  double sigma = 0.5;
  std::vector<double> coral_task_weights;  // empty = all 1
  bool use_class_weights = true;
};

// logits: K values (nll, regclass, msmooth, ordinal) or the K-1 values g + b_k (coral).
// scalar: regclass regression output.
struct HeadOutput {
  HeadKind kind = HeadKind::Nll;
  int num_classes = 0;
  Vector logits;
  double scalar = 0.0;
};

// Loss of one sample; the batch criterion is the mean of these. Fills d/dlogits and
// d/dscalar into `grad` when non-null.
double head_sample_loss(const HeadOutput& out, int label, double class_weight,
                        const LossOptions& options, HeadOutput* grad);

// log-probabilities (nll, regclass) or sigmoids (others), as reported to users.
Vector head_activations(const HeadOutput& out);

// Class distribution for ensembling; always non-negative and summing to 1.
Vector probs_from_head(const HeadOutput& out);
// P(y = k) from exceedance probabilities P(y > k), k = 1..K-1; clamps and renormalizes.
Vector probs_from_exceedance(std::span<const double> exceed, int num_classes);

// Decoded level, nullopt when an ordinal prediction is undefined.
std::optional<int> decode_head(const HeadOutput& out);

int argmax_lowest(std::span<const double> values);  // 0-based, ties to the lowest index

}  // namespace ordino
