// SPDX-License-Identifier: Apache-2.0
#include "core/nn/layers.hpp"

#include <cmath>

#include "core/error.hpp"
#include "core/synth.hpp"

namespace ordino::nn {

namespace {

void check_rows(const Matrix& x, Index expected, const char* what) {
  if (x.rows() != expected) {
    fail(ErrorCode::ShapeMismatch, std::string(what) + ": expected " + std::to_string(expected) +
                                       " input features, got " + std::to_string(x.rows()));
  }
}

}  // namespace

Vector softmax(const Vector& scores) {
  const double top = scores.maxCoeff();
  Vector e = (scores.array() - top).exp().matrix();
  return e / e.sum();
}

Vector log_softmax(const Vector& scores) {
  const double top = scores.maxCoeff();
  const double lse = top + std::log((scores.array() - top).exp().sum());
  return (scores.array() - lse).matrix();
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// ---------------------------------------------------------------------------

Linear Linear::create(ParameterStore& store, const std::string& name, Index in, Index out,
                      bool with_bias) {
  Linear l;
  l.in = in;
  l.out = out;
  l.has_bias = with_bias;
  l.weight = store.add(name + ".weight", out, in, InitKind::Xavier, in, out);
  if (with_bias) l.bias = store.add(name + ".bias", out, 1, InitKind::Zero, in, out);
  return l;
}

Vector Linear::forward(const ParameterStore& store, const Vector& x) const {
  if (x.size() != in) {
    fail(ErrorCode::ShapeMismatch, "linear layer expects " + std::to_string(in) +
                                       " inputs, got " + std::to_string(x.size()));
  }
  Vector y = store.value(weight) * x;
  if (has_bias) y += store.value(bias);
  return y;
}

Vector Linear::backward(ParameterStore& store, const Vector& x, const Vector& dy) const {
  store.grad(weight).noalias() += dy * x.transpose();
  if (has_bias) store.grad(bias) += dy;
  return store.value(weight).transpose() * dy;
}

// ---------------------------------------------------------------------------

Embedding Embedding::create(ParameterStore& store, const std::string& name, Index vocab,
                            Index dim) {
  Embedding e;
  e.vocab = vocab;
  e.dim = dim;
  e.table = store.add(name + ".table", dim, vocab, InitKind::Xavier, vocab, dim);
  return e;
}

Matrix Embedding::forward(const ParameterStore& store, const Matrix& tokens) const {
  check_rows(tokens, 1, "embedding");
  const Matrix& table_v = store.value(table);
  Matrix out(dim, tokens.cols());
  for (Index t = 0; t < tokens.cols(); ++t) {
    const auto tok = static_cast<Index>(tokens(0, t));
    if (tok < 0 || tok >= vocab) {
      fail(ErrorCode::ShapeMismatch, "token index " + std::to_string(tok) + " outside vocabulary");
    }
    out.col(t) = table_v.col(tok);
  }
  return out;
}

void Embedding::backward(ParameterStore& store, const Matrix& tokens, const Matrix& d_out) const {
  Matrix& g = store.grad(table);
  for (Index t = 0; t < tokens.cols(); ++t) g.col(static_cast<Index>(tokens(0, t))) += d_out.col(t);
}

// ---------------------------------------------------------------------------

GruStack GruStack::create(ParameterStore& store, const std::string& prefix,
                          const GruLayerConfig& config) {
  if (config.num_layers < 1) fail(ErrorCode::ConfigError, "GRU needs at least one layer");
  if (config.hidden_dim < 1 || config.input_dim < 1) {
    fail(ErrorCode::ConfigError, "GRU dimensions must be positive");
  }
  if (!(config.inter_layer_dropout >= 0.0 && config.inter_layer_dropout < 1.0)) {
    fail(ErrorCode::ConfigError, "GRU dropout must lie in [0, 1)");
  }
  GruStack g;
  g.config_ = config;
  const Index h = config.hidden_dim;
  for (int l = 0; l < config.num_layers; ++l) {
    const Index in = l == 0 ? config.input_dim : h;
    const std::string p = prefix + ".l" + std::to_string(l);
    Layer layer{};
    layer.w_ih = store.add(p + ".w_ih", 3 * h, in, InitKind::Xavier, in, h);
    layer.w_hh = store.add(p + ".w_hh", 3 * h, h, InitKind::Xavier, h, h);
    layer.b_ih = store.add(p + ".b_ih", 3 * h, 1, InitKind::Zero, in, h);
    layer.b_hh = store.add(p + ".b_hh", 3 * h, 1, InitKind::Zero, h, h);
    g.layers_.push_back(layer);
  }
  return g;
}

Matrix GruStack::forward(const ParameterStore& store, const Matrix& x, Mode mode,
                         std::uint64_t dropout_seed, Cache* cache) const {
  check_rows(x, config_.input_dim, "GRU");
  if (x.cols() < 1) fail(ErrorCode::ShapeMismatch, "GRU input has no time steps");
  Cache local;
  Cache& c = cache ? *cache : local;
  c.layers.assign(layers_.size(), {});
  c.masks.clear();

  const Index h = config_.hidden_dim;
  const Index steps = x.cols();
  const double p = config_.inter_layer_dropout;
  Matrix input = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    LayerCache& lc = c.layers[l];
    const Matrix& w_hh = store.value(L.w_hh);
    const Vector b_hh = store.value(L.b_hh);
    Matrix gi = store.value(L.w_ih) * input;
    gi.colwise() += Vector(store.value(L.b_ih));

    lc.r.resize(h, steps);
    lc.z.resize(h, steps);
    lc.n.resize(h, steps);
    lc.hn.resize(h, steps);
    lc.h.resize(h, steps + 1);
    lc.h.col(0).setZero();
    Vector gh(3 * h);
    for (Index t = 0; t < steps; ++t) {
      gh.noalias() = w_hh * lc.h.col(t);
      gh += b_hh;
      for (Index k = 0; k < h; ++k) {
        const double r = sigmoid(gi(k, t) + gh(k));
        const double z = sigmoid(gi(h + k, t) + gh(h + k));
        const double hn = gh(2 * h + k);
        const double n = std::tanh(gi(2 * h + k, t) + r * hn);
        lc.r(k, t) = r;
        lc.z(k, t) = z;
        lc.n(k, t) = n;
        lc.hn(k, t) = hn;
        lc.h(k, t + 1) = (1.0 - z) * n + z * lc.h(k, t);
      }
    }
    lc.x = std::move(input);
    input = lc.h.rightCols(steps);

    if (l + 1 < layers_.size() && mode == Mode::Train && p > 0.0) {
      Rng rng(hash_combine(dropout_seed, l));
      Matrix mask(h, steps);
      const double keep = 1.0 - p;
      for (Index i = 0; i < mask.size(); ++i) {
        const double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
        mask.data()[i] = u < keep ? 1.0 / keep : 0.0;
      }
      input = input.cwiseProduct(mask);
      c.masks.push_back(std::move(mask));
    }
  }
  return input;
}

Matrix GruStack::backward(ParameterStore& store, const Cache& cache, const Matrix& d_out) const {
  const Index h = config_.hidden_dim;
  Matrix d_upper = d_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& L = layers_[l];
    const LayerCache& lc = cache.layers[l];
    const Index steps = lc.r.cols();
    if (l + 1 < layers_.size() && l < cache.masks.size()) {
      d_upper = d_upper.cwiseProduct(cache.masks[l]);
    }
    const Matrix& w_hh = store.value(L.w_hh);
    Matrix d_gi(3 * h, steps);
    Matrix d_gh(3 * h, steps);
    Vector dh_next = Vector::Zero(h);
    for (Index t = steps; t-- > 0;) {
      const Vector dh = d_upper.col(t) + dh_next;
      Vector dh_prev(h);
      for (Index k = 0; k < h; ++k) {
        const double r = lc.r(k, t);
        const double z = lc.z(k, t);
        const double n = lc.n(k, t);
        const double hp = lc.h(k, t);
        const double dn = dh(k) * (1.0 - z);
        const double dz = dh(k) * (hp - n);
        const double dn_pre = dn * (1.0 - n * n);
        const double dr_pre = dn_pre * lc.hn(k, t) * r * (1.0 - r);
        const double dz_pre = dz * z * (1.0 - z);
        d_gi(k, t) = dr_pre;
        d_gi(h + k, t) = dz_pre;
        d_gi(2 * h + k, t) = dn_pre;
        d_gh(k, t) = dr_pre;
        d_gh(h + k, t) = dz_pre;
        d_gh(2 * h + k, t) = dn_pre * r;
        dh_prev(k) = dh(k) * z;
      }
      dh_next.noalias() = dh_prev + w_hh.transpose() * d_gh.col(t);
    }
    store.grad(L.w_hh).noalias() += d_gh * lc.h.leftCols(steps).transpose();
    store.grad(L.b_hh) += d_gh.rowwise().sum();
    store.grad(L.w_ih).noalias() += d_gi * lc.x.transpose();
    store.grad(L.b_ih) += d_gi.rowwise().sum();
    d_upper = store.value(L.w_ih).transpose() * d_gi;
  }
  return d_upper;
}

// ---------------------------------------------------------------------------

ContextAttention ContextAttention::create(ParameterStore& store, const std::string& prefix,
                                          Index dim) {
  ContextAttention a;
  a.dim = dim;
  a.w = store.add(prefix + ".w", dim, dim, InitKind::Xavier, dim, dim);
  a.b = store.add(prefix + ".b", dim, 1, InitKind::Zero, dim, dim);
  a.c = store.add(prefix + ".context", dim, 1, InitKind::Xavier, dim, 1);
  return a;
}

Vector ContextAttention::forward(const ParameterStore& store, const Matrix& h, Cache* cache) const {
  check_rows(h, dim, "context attention");
  if (h.cols() < 1) fail(ErrorCode::ShapeMismatch, "attention over an empty sequence");
  Matrix pre = store.value(w) * h;
  pre.colwise() += Vector(store.value(b));
  Matrix u = pre.array().tanh().matrix();
  const Vector scores = u.transpose() * Vector(store.value(c));
  Vector alpha = softmax(scores);
  Vector y = h * alpha;
  if (cache) {
    cache->h = h;
    cache->u = std::move(u);
    cache->alpha = std::move(alpha);
  }
  return y;
}

Matrix ContextAttention::backward(ParameterStore& store, const Cache& cache, const Vector& dy) const {
  const Vector& alpha = cache.alpha;
  Matrix dh = dy * alpha.transpose();
  const Vector d_alpha = cache.h.transpose() * dy;
  const Vector ds = alpha.cwiseProduct((d_alpha.array() - alpha.dot(d_alpha)).matrix());
  store.grad(c).noalias() += cache.u * ds;
  const Matrix du = Vector(store.value(c)) * ds.transpose();
  const Matrix d_pre = du.cwiseProduct((1.0 - cache.u.array().square()).matrix());
  store.grad(w).noalias() += d_pre * cache.h.transpose();
  store.grad(b) += d_pre.rowwise().sum();
  dh.noalias() += store.value(w).transpose() * d_pre;
  return dh;
}

}  // namespace ordino::nn
