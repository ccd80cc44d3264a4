// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "core/nn/parameter.hpp"

// Sequences are stored feature-major: a (features x T) matrix, one column per note.
namespace ordino::nn {

Vector softmax(const Vector& scores);
Vector log_softmax(const Vector& scores);
double sigmoid(double x);
double softplus(double x);

struct Linear {
  ParamId weight = 0;
  ParamId bias = 0;
  bool has_bias = true;
  Index in = 0;
  Index out = 0;

  static Linear create(ParameterStore& store, const std::string& name, Index in, Index out,
                       bool with_bias = true);
  Vector forward(const ParameterStore& store, const Vector& x) const;
  // Accumulates weight/bias gradients, returns dL/dx.
  Vector backward(ParameterStore& store, const Vector& x, const Vector& dy) const;
};

// Trainable lookup table for pitch tokens; tokens arrive as a 1 x T row of indices.
struct Embedding {
  ParamId table = 0;  // dim x vocab
  Index vocab = 0;
  Index dim = 0;

  static Embedding create(ParameterStore& store, const std::string& name, Index vocab, Index dim);
  Matrix forward(const ParameterStore& store, const Matrix& tokens) const;
  void backward(ParameterStore& store, const Matrix& tokens, const Matrix& d_out) const;
};

struct GruLayerConfig {
  Index input_dim = 0;
  Index hidden_dim = 64;
  int num_layers = 2;
  double inter_layer_dropout = 0.2;
};

// Stacked unidirectional GRU, zero initial state:
//   r = sig(W_ir x + b_ir + W_hr h + b_hr), z = sig(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn)), h' = (1 - z) * n + z * h
// Inverted dropout on the outputs of every layer except the last, train mode only.
class GruStack {
 public:
  struct LayerCache {
    Matrix x;       // input, in x T
    Matrix r, z, n; // gates, hidden x T
    Matrix hn;      // W_hn h_{t-1} + b_hn, hidden x T
    Matrix h;       // hidden x (T + 1), column 0 is the zero state
  };
  struct Cache {
    std::vector<LayerCache> layers;
    std::vector<Matrix> masks;  // one per layer boundary (train mode)
  };

  static GruStack create(ParameterStore& store, const std::string& prefix,
                         const GruLayerConfig& config);

  // Returns the last layer's states, hidden x T.
  Matrix forward(const ParameterStore& store, const Matrix& x, Mode mode,
                 std::uint64_t dropout_seed, Cache* cache) const;
  Matrix backward(ParameterStore& store, const Cache& cache, const Matrix& d_out) const;

  const GruLayerConfig& config() const { return config_; }

 private:
  struct Layer {
    ParamId w_ih, w_hh, b_ih, b_hh;
  };
  GruLayerConfig config_;
  std::vector<Layer> layers_;
};

// y = sum_t alpha_t h_t with alpha = softmax_t(tanh(W h_t + b)^T c).
struct ContextAttention {
  struct Cache {
    Matrix h;      // dim x T
    Matrix u;      // tanh(W h + b)
    Vector alpha;  // T
  };

  ParamId w = 0;
  ParamId b = 0;
  ParamId c = 0;
  Index dim = 0;

  static ContextAttention create(ParameterStore& store, const std::string& prefix, Index dim);
  Vector forward(const ParameterStore& store, const Matrix& h, Cache* cache) const;
  Matrix backward(ParameterStore& store, const Cache& cache, const Vector& dy) const;
};

}  // namespace ordino::nn
