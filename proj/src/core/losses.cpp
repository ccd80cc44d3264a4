// SPDX-License-Identifier: Apache-2.0
#include "core/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/error.hpp"
#include "core/nn/layers.hpp"

namespace ordino {

namespace {

void check_label(int label, int num_classes) {
  if (num_classes < 2) fail(ErrorCode::InvalidArgument, "need at least 2 classes");
  if (label < 1 || label > num_classes) {
    fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(label) + " outside 1.." +
                                         std::to_string(num_classes));
  }
}

double weight_at(std::span<const double> weights, int label) {
  if (weights.empty()) return 1.0;
  return weights[static_cast<std::size_t>(label - 1)];
}

void check_batch(Eigen::Index rows, std::size_t labels) {
  if (static_cast<std::size_t>(rows) != labels || labels == 0) {
    fail(ErrorCode::ShapeMismatch, "batch size does not match label count");
  }
}

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

}  // namespace

std::string_view head_kind_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::Nll: return "nll";
    case HeadKind::RegClass: return "regclass";
    case HeadKind::MSmooth: return "msmooth";
    case HeadKind::Ordinal: return "ordinal";
    case HeadKind::Coral: return "coral";
  }
  return "?";
}

HeadKind parse_head_kind(std::string_view text) {
  for (HeadKind k : {HeadKind::Nll, HeadKind::RegClass, HeadKind::MSmooth, HeadKind::Ordinal,
                     HeadKind::Coral}) {
    if (head_kind_string(k) == text) return k;
  }
  fail(ErrorCode::ConfigError, "unknown loss '" + std::string(text) +
                                   "' (expected nll|regclass|msmooth|ordinal|coral)");
}

LabelEncoding one_hot_encode(int label, int num_classes) {
  check_label(label, num_classes);
  LabelEncoding e{EncodingKind::OneHot, num_classes, std::vector<double>(static_cast<std::size_t>(num_classes), 0.0)};
  e.values[static_cast<std::size_t>(label - 1)] = 1.0;
  return e;
}

LabelEncoding smoothed_encode(int label, int num_classes, double sigma) {
  check_label(label, num_classes);
  if (!(sigma > 0.0)) fail(ErrorCode::InvalidArgument, "smoothing sigma must be positive");
  LabelEncoding e{EncodingKind::Smoothed, num_classes, std::vector<double>(static_cast<std::size_t>(num_classes), 0.0)};
  for (int k = std::max(1, label - 1); k <= std::min(num_classes, label + 1); ++k) {
    const double d = static_cast<double>(k - label);
    // The Gaussian peaks at exactly 1 on the label, so no further normalization applies.
    e.values[static_cast<std::size_t>(k - 1)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
  }
  return e;
}

LabelEncoding ordinal_encode(int label, int num_classes) {
  check_label(label, num_classes);
  LabelEncoding e{EncodingKind::Ordinal, num_classes, std::vector<double>(static_cast<std::size_t>(num_classes), 0.0)};
  std::fill_n(e.values.begin(), label, 1.0);
  return e;
}

LabelEncoding coral_encode(int label, int num_classes) {
  check_label(label, num_classes);
  LabelEncoding e{EncodingKind::CoralBinary, num_classes, std::vector<double>(static_cast<std::size_t>(num_classes - 1), 0.0)};
  for (int k = 1; k < num_classes; ++k) e.values[static_cast<std::size_t>(k - 1)] = label > k ? 1.0 : 0.0;
  return e;
}

std::optional<int> ordinal_decode(std::span<const double> pred, double threshold) {
  int prefix = 0;
  while (prefix < static_cast<int>(pred.size()) && pred[static_cast<std::size_t>(prefix)] > threshold) ++prefix;
  if (prefix == 0) return std::nullopt;
  for (std::size_t k = static_cast<std::size_t>(prefix); k < pred.size(); ++k) {
    if (pred[k] > threshold) return std::nullopt;
  }
  return prefix;
}

int coral_decode(double logit_g, std::span<const double> biases, double threshold) {
  int level = 1;
  for (double b : biases) level += nn::sigmoid(logit_g + b) > threshold ? 1 : 0;
  return level;
}

std::vector<double> class_weights(std::span<const int> labels, int num_classes) {
  std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
  for (int y : labels) {
    check_label(y, num_classes);
    counts[static_cast<std::size_t>(y - 1)] += 1.0;
  }
  const double n = static_cast<double>(labels.size());
  std::vector<double> w(counts.size(), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0) w[c] = n / (static_cast<double>(num_classes) * counts[c]);
  }
  return w;
}

// ---------------------------------------------------------------------------

double nll_loss(const Matrix& log_probs, std::span<const int> labels,
                std::span<const double> weights) {
  check_batch(log_probs.rows(), labels.size());
  const int k = static_cast<int>(log_probs.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_label(labels[i], k);
    total -= weight_at(weights, labels[i]) *
             log_probs(static_cast<Eigen::Index>(i), labels[i] - 1);
  }
  return total / static_cast<double>(labels.size());
}

double regclass_loss(const Matrix& log_probs, std::span<const double> scalar_pred,
                     std::span<const int> labels, double alpha, std::span<const double> weights) {
  if (scalar_pred.size() != labels.size()) {
    fail(ErrorCode::ShapeMismatch, "regression outputs do not match label count");
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double d = scalar_pred[i] - static_cast<double>(labels[i]);
    mse += weight_at(weights, labels[i]) * d * d;
  }
  return nll_loss(log_probs, labels, weights) + alpha * mse / static_cast<double>(labels.size());
}

double msmooth_loss(const Matrix& probs, std::span<const int> labels, double sigma,
                    std::span<const double> weights) {
  check_batch(probs.rows(), labels.size());
  const int k = static_cast<int>(probs.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto target = smoothed_encode(labels[i], k, sigma);
    double bce = 0.0;
    for (int c = 0; c < k; ++c) {
      const double x = clamp_probability(probs(static_cast<Eigen::Index>(i), c));
      const double t = target.values[static_cast<std::size_t>(c)];
      bce -= t * std::log(x) + (1.0 - t) * std::log(1.0 - x);
    }
    total += weight_at(weights, labels[i]) * bce;
  }
  return total / static_cast<double>(labels.size());
}

double ordinal_loss(const Matrix& pred, std::span<const int> labels) {
  check_batch(pred.rows(), labels.size());
  const int k = static_cast<int>(pred.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto target = ordinal_encode(labels[i], k);
    double se = 0.0;
    for (int c = 0; c < k; ++c) {
      const double d = pred(static_cast<Eigen::Index>(i), c) - target.values[static_cast<std::size_t>(c)];
      se += d * d;
    }
    total += se / static_cast<double>(k);
  }
  return total / static_cast<double>(labels.size());
}

double coral_loss(std::span<const double> logit_g, std::span<const double> biases,
                  std::span<const int> labels, std::span<const double> task_weights) {
  if (logit_g.size() != labels.size() || labels.empty()) {
    fail(ErrorCode::ShapeMismatch, "coral outputs do not match label count");
  }
  if (!task_weights.empty() && task_weights.size() != biases.size()) {
    fail(ErrorCode::ShapeMismatch, "coral task weights must have K-1 entries");
  }
  const int k = static_cast<int>(biases.size()) + 1;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto target = coral_encode(labels[i], k);
    for (std::size_t j = 0; j < biases.size(); ++j) {
      const double z = logit_g[i] + biases[j];
      const double lambda = task_weights.empty() ? 1.0 : task_weights[j];
      // -[t log s(z) + (1 - t) log(1 - s(z))] = softplus(z) - t z
      total += lambda * (nn::softplus(z) - target.values[j] * z);
    }
  }
  return total / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------------------

double head_sample_loss(const HeadOutput& out, int label, double class_weight,
                        const LossOptions& options, HeadOutput* grad) {
  const int k = out.num_classes;
  check_label(label, k);
  const double w = options.use_class_weights ? class_weight : 1.0;
  if (grad) {
    grad->kind = out.kind;
    grad->num_classes = k;
    grad->logits = Vector::Zero(out.logits.size());
    grad->scalar = 0.0;
  }
  const std::size_t y = static_cast<std::size_t>(label - 1);

  switch (out.kind) {
    case HeadKind::Nll:
    case HeadKind::RegClass: {
      const Vector logp = nn::log_softmax(out.logits);
      double loss = -w * logp(static_cast<Eigen::Index>(y));
      if (grad) {
        grad->logits = w * logp.array().exp().matrix();
        grad->logits(static_cast<Eigen::Index>(y)) -= w;
      }
      if (out.kind == HeadKind::RegClass) {
        const double d = out.scalar - static_cast<double>(label);
        loss += options.alpha * w * d * d;
        if (grad) grad->scalar = 2.0 * options.alpha * w * d;
      }
      return loss;
    }
    case HeadKind::MSmooth: {
      const auto target = smoothed_encode(label, k, options.sigma);
      double loss = 0.0;
      for (int c = 0; c < k; ++c) {
        const double s = nn::sigmoid(out.logits(c));
        const double x = clamp_probability(s);
        const double t = target.values[static_cast<std::size_t>(c)];
        loss -= w * (t * std::log(x) + (1.0 - t) * std::log(1.0 - x));
        if (grad && x == s) grad->logits(c) = w * (s - t);
      }
      return loss;
    }
    case HeadKind::Ordinal: {
      const auto target = ordinal_encode(label, k);
      double loss = 0.0;
      for (int c = 0; c < k; ++c) {
        const double s = nn::sigmoid(out.logits(c));
        const double d = s - target.values[static_cast<std::size_t>(c)];
        loss += d * d / static_cast<double>(k);
        if (grad) grad->logits(c) = 2.0 * d * s * (1.0 - s) / static_cast<double>(k);
      }
      return loss;
    }
    case HeadKind::Coral: {
      const auto target = coral_encode(label, k);
      double loss = 0.0;
      for (int j = 0; j + 1 < k; ++j) {
        const double z = out.logits(j);
        const double t = target.values[static_cast<std::size_t>(j)];
        const double lambda = options.coral_task_weights.empty()
                                  ? 1.0
                                  : options.coral_task_weights.at(static_cast<std::size_t>(j));
        loss += lambda * (nn::softplus(z) - t * z);
        if (grad) grad->logits(j) = lambda * (nn::sigmoid(z) - t);
      }
      return loss;
    }
  }
  return 0.0;
}

Vector head_activations(const HeadOutput& out) {
  if (out.kind == HeadKind::Nll || out.kind == HeadKind::RegClass) return nn::log_softmax(out.logits);
  return out.logits.unaryExpr([](double z) { return nn::sigmoid(z); });
}

Vector probs_from_exceedance(std::span<const double> exceed, int num_classes) {
  if (static_cast<int>(exceed.size()) != num_classes - 1) {
    fail(ErrorCode::ShapeMismatch, "need K-1 exceedance probabilities");
  }
  Vector p(num_classes);
  for (int k = 1; k <= num_classes; ++k) {
    const double above_prev = k == 1 ? 1.0 : exceed[static_cast<std::size_t>(k - 2)];
    const double above_this = k == num_classes ? 0.0 : exceed[static_cast<std::size_t>(k - 1)];
    p(k - 1) = std::max(0.0, above_prev - above_this);
  }
  const double total = p.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    warn("degenerate class distribution, falling back to uniform");
    return Vector::Constant(num_classes, 1.0 / num_classes);
  }
  return p / total;
}

Vector probs_from_head(const HeadOutput& out) {
  const int k = out.num_classes;
  switch (out.kind) {
    case HeadKind::Nll:
    case HeadKind::RegClass:
      return nn::softmax(out.logits);
    case HeadKind::MSmooth: {
      const Vector s = head_activations(out);
      const double total = s.sum();
      if (!(total > 0.0) || !std::isfinite(total)) {
        warn("degenerate class distribution, falling back to uniform");
        return Vector::Constant(k, 1.0 / k);
      }
      return s / total;
    }
    case HeadKind::Ordinal: {
      const Vector s = head_activations(out);
      // Output k estimates P(y >= k); the first one is the implicit bound P(y > 0) = 1.
      std::vector<double> exceed(s.data() + 1, s.data() + s.size());
      return probs_from_exceedance(exceed, k);
    }
    case HeadKind::Coral: {
      const Vector s = head_activations(out);
      std::vector<double> exceed(s.data(), s.data() + s.size());
      return probs_from_exceedance(exceed, k);
    }
  }
  return Vector::Constant(k, 1.0 / k);
}

int argmax_lowest(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

std::optional<int> decode_head(const HeadOutput& out) {
  switch (out.kind) {
    case HeadKind::Nll:
    case HeadKind::RegClass:
    case HeadKind::MSmooth:
      return argmax_lowest(std::span<const double>(out.logits.data(), static_cast<std::size_t>(out.logits.size()))) + 1;
    case HeadKind::Ordinal: {
      const Vector s = head_activations(out);
      return ordinal_decode(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())));
    }
    case HeadKind::Coral: {
      const Vector s = head_activations(out);
      int level = 1;
      for (Eigen::Index j = 0; j < s.size(); ++j) level += s(j) > 0.5 ? 1 : 0;
      return level;
    }
  }
  return std::nullopt;
}

}  // namespace ordino
