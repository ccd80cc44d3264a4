// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "core/nn/parameter.hpp"

namespace ordino::nn {

// One AutoInt interacting layer over B fields of width `field_dim` (one field per column):
//   per head m: q_b = Q_m e_b, k_b = K_m e_b, v_b = V_m e_b
//               a_bj = softmax_j(q_b . k_j),  o_b^m = sum_j a_bj v_j
//   out_b = ReLU(concat_m o_b^m + W_res e_b), flattened field by field.
class AutoIntBlock {
 public:
  struct Cache {
    Matrix fields;                  // field_dim x B
    std::vector<Matrix> q, k, v;    // head_dim x B per head
    std::vector<Matrix> attention;  // B x B per head, rows sum to 1
    Matrix pre;                     // (heads * head_dim) x B, before ReLU
  };

  static AutoIntBlock create(ParameterStore& store, const std::string& prefix, Index field_dim,
                             int heads, Index head_dim);

  Vector forward(const ParameterStore& store, const Matrix& fields, Cache* cache) const;
  Matrix backward(ParameterStore& store, const Cache& cache, const Vector& dy) const;

  Index output_dim(Index fields) const { return static_cast<Index>(heads_) * head_dim_ * fields; }

 private:
  Index field_dim_ = 0;
  int heads_ = 2;
  Index head_dim_ = 0;
  std::vector<ParamId> wq_, wk_, wv_;
  ParamId w_res_ = 0;
};

}  // namespace ordino::nn
