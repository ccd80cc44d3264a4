// SPDX-License-Identifier: Apache-2.0
#include "core/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ordino::nn {

GradCheckReport grad_check(ParameterStore& store, const LossFunction& loss,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  loss(true);
  std::vector<Matrix> analytic;
  analytic.reserve(store.size());
  for (const auto& p : store.all()) analytic.push_back(p.grad);

  // Flat (parameter, entry) list, subsampled when large.
  std::vector<std::pair<std::size_t, Index>> entries;
  for (std::size_t pi = 0; pi < store.size(); ++pi) {
    for (Index i = 0; i < store.all()[pi].value.size(); ++i) entries.emplace_back(pi, i);
  }
  report.total_entries = entries.size();
  if (entries.size() > options.max_entries) {
    Rng rng(options.seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(options.max_entries);
    std::sort(entries.begin(), entries.end());
  }

  for (const auto& [pi, i] : entries) {
    double& slot = store.all()[pi].value.data()[i];
    const double original = slot;
    const double a = analytic[pi].data()[i];
    double numeric = 0.0;
    double rel = INFINITY;
    double step = options.epsilon;
    for (int attempt = 0; attempt <= options.refinements; ++attempt, step /= 10.0) {
      slot = original + step;
      const double plus = loss(false);
      slot = original - step;
      const double minus = loss(false);
      slot = original;
      const double n = (plus - minus) / (2.0 * step);
      const double denom = std::max({std::abs(a), std::abs(n), options.denominator_floor});
      const double r = std::abs(a - n) / denom;
      if (attempt == 0 || r < rel) {
        rel = r;
        numeric = n;
      }
      if (rel <= options.tolerance) break;
    }
    ++report.checked_entries;
    if (rel > report.max_rel_error || std::isnan(rel)) {
      report.max_rel_error = std::isnan(rel) ? INFINITY : rel;
      report.worst_parameter = store.all()[pi].name;
    }
    if (!(rel <= options.tolerance)) {
      ++report.failure_count;
      if (report.failures.size() < options.max_reported_failures) {
        report.failures.push_back({store.all()[pi].name, static_cast<std::size_t>(i), a, numeric, rel});
      }
    }
  }
  // Leave the analytic gradients in place for callers that inspect them.
  for (std::size_t pi = 0; pi < store.size(); ++pi) store.all()[pi].grad = analytic[pi];
  return report;
}

}  // namespace ordino::nn
