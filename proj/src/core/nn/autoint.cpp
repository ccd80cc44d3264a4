// SPDX-License-Identifier: Apache-2.0
#include "core/nn/autoint.hpp"

#include "core/error.hpp"
#include "core/nn/layers.hpp"

namespace ordino::nn {

AutoIntBlock AutoIntBlock::create(ParameterStore& store, const std::string& prefix,
                                  Index field_dim, int heads, Index head_dim) {
  if (heads < 1 || head_dim < 1) fail(ErrorCode::ConfigError, "AutoInt needs heads, head_dim >= 1");
  AutoIntBlock a;
  a.field_dim_ = field_dim;
  a.heads_ = heads;
  a.head_dim_ = head_dim;
  for (int m = 0; m < heads; ++m) {
    const std::string p = prefix + ".h" + std::to_string(m);
    a.wq_.push_back(store.add(p + ".query", head_dim, field_dim, InitKind::Xavier, field_dim, head_dim));
    a.wk_.push_back(store.add(p + ".key", head_dim, field_dim, InitKind::Xavier, field_dim, head_dim));
    a.wv_.push_back(store.add(p + ".value", head_dim, field_dim, InitKind::Xavier, field_dim, head_dim));
  }
  const Index out = static_cast<Index>(heads) * head_dim;
  a.w_res_ = store.add(prefix + ".residual", out, field_dim, InitKind::Xavier, field_dim, out);
  return a;
}

Vector AutoIntBlock::forward(const ParameterStore& store, const Matrix& fields, Cache* cache) const {
  if (fields.rows() != field_dim_) {
    fail(ErrorCode::WidthMismatch, "AutoInt field width " + std::to_string(fields.rows()) +
                                       " differs from " + std::to_string(field_dim_));
  }
  Cache local;
  Cache& c = cache ? *cache : local;
  c.fields = fields;
  c.q.clear();
  c.k.clear();
  c.v.clear();
  c.attention.clear();
  const Index nf = fields.cols();
  c.pre = store.value(w_res_) * fields;
  for (int m = 0; m < heads_; ++m) {
    Matrix q = store.value(wq_[static_cast<std::size_t>(m)]) * fields;
    Matrix k = store.value(wk_[static_cast<std::size_t>(m)]) * fields;
    Matrix v = store.value(wv_[static_cast<std::size_t>(m)]) * fields;
    const Matrix scores = q.transpose() * k;  // B x B, row b attends over j
    Matrix att(nf, nf);
    for (Index b = 0; b < nf; ++b) att.row(b) = softmax(scores.row(b).transpose()).transpose();
    c.pre.middleRows(m * head_dim_, head_dim_).noalias() += v * att.transpose();
    c.q.push_back(std::move(q));
    c.k.push_back(std::move(k));
    c.v.push_back(std::move(v));
    c.attention.push_back(std::move(att));
  }
  const Matrix out = c.pre.cwiseMax(0.0);
  return Eigen::Map<const Vector>(out.data(), out.size());
}

Matrix AutoIntBlock::backward(ParameterStore& store, const Cache& cache, const Vector& dy) const {
  const Index nf = cache.fields.cols();
  Matrix d_pre = Eigen::Map<const Matrix>(dy.data(), cache.pre.rows(), nf);
  d_pre = d_pre.cwiseProduct((cache.pre.array() > 0.0).cast<double>().matrix());

  store.grad(w_res_).noalias() += d_pre * cache.fields.transpose();
  Matrix d_fields = store.value(w_res_).transpose() * d_pre;
  for (int m = 0; m < heads_; ++m) {
    const auto mi = static_cast<std::size_t>(m);
    const Matrix d_o = d_pre.middleRows(m * head_dim_, head_dim_);  // head_dim x B
    const Matrix& att = cache.attention[mi];
    const Matrix d_v = d_o * att;
    const Matrix d_att = d_o.transpose() * cache.v[mi];  // B x B
    Matrix d_scores(nf, nf);
    for (Index b = 0; b < nf; ++b) {
      const double inner = att.row(b).dot(d_att.row(b));
      d_scores.row(b) = att.row(b).cwiseProduct((d_att.row(b).array() - inner).matrix());
    }
    const Matrix d_q = cache.k[mi] * d_scores.transpose();
    const Matrix d_k = cache.q[mi] * d_scores;
    store.grad(wq_[mi]).noalias() += d_q * cache.fields.transpose();
    store.grad(wk_[mi]).noalias() += d_k * cache.fields.transpose();
    store.grad(wv_[mi]).noalias() += d_v * cache.fields.transpose();
    d_fields.noalias() += store.value(wq_[mi]).transpose() * d_q;
    d_fields.noalias() += store.value(wk_[mi]).transpose() * d_k;
    d_fields.noalias() += store.value(wv_[mi]).transpose() * d_v;
  }
  return d_fields;
}

}  // namespace ordino::nn
