// SPDX-License-Identifier: Apache-2.0
#pragma once

// Straightforward reference implementations used to cross-check the library.

#include <optional>
#include <vector>

namespace oracle {

// Stuart's tau-c by enumerating every pair: 2 m (C - D) / (n^2 (m - 1)).
double tau_c(const std::vector<long>& x, const std::vector<long>& y);

struct Tally {
  double acc_k = 0.0;    // percent, macro over supported classes
  double acc_pm1 = 0.0;  // percent, macro
  double mse = 0.0;      // macro over classes of the class-mean squared error
  double acc_3 = 0.0;    // percent, macro over grouped classes
  double trace_formula = 0.0;
};

// Per-class loops over raw pairs; 0 in `pred` means undefined (wrong, error K^2).
Tally tally(const std::vector<int>& truth, const std::vector<int>& pred, int num_classes,
            int group_size);

// y = sum_t a_t h_t, a = softmax(tanh(W h_t + b) . c), with plain loops.
std::vector<double> attention(const std::vector<std::vector<double>>& w, const std::vector<double>& b,
                              const std::vector<double>& c, const std::vector<std::vector<double>>& h_cols,
                              std::vector<double>* weights);

// First Adam step for a gradient g: the update is -lr * g_hat / (|g_hat| + eps), g_hat the
// clipped gradient, because both bias-corrected moments equal g_hat and g_hat^2.
double adam_first_step(double value, double grad, double clip_scale, double lr, double eps);

}  // namespace oracle
