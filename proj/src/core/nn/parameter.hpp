// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ordino::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

enum class Mode { Train, Eval };

enum class InitKind { Xavier, Zero };

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;
  long step_count = 0;
  InitKind init = InitKind::Xavier;
  Index fan_in = 1;
  Index fan_out = 1;
};

using ParamId = std::size_t;

// Owns every trainable tensor of a model. Layers hold ParamIds, so a store copy is a
// full model snapshot.
class ParameterStore {
 public:
  ParamId add(std::string name, Index rows, Index cols, InitKind init, Index fan_in, Index fan_out);

  Parameter& operator[](ParamId id) { return params_.at(id); }
  const Parameter& operator[](ParamId id) const { return params_.at(id); }
  const Matrix& value(ParamId id) const { return params_.at(id).value; }
  Matrix& grad(ParamId id) { return params_.at(id).grad; }

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t entry_count() const;

  void zero_grad();
  // Xavier-uniform for matrices, zeros for biases, from one seed.
  void initialize(std::uint64_t seed);
  void fill_zero();

 private:
  std::vector<Parameter> params_;
};

}  // namespace ordino::nn
