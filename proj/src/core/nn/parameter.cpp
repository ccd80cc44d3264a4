// SPDX-License-Identifier: Apache-2.0
#include "core/nn/parameter.hpp"

#include <cmath>

#include "core/error.hpp"

namespace ordino::nn {

ParamId ParameterStore::add(std::string name, Index rows, Index cols, InitKind init, Index fan_in,
                            Index fan_out) {
  if (find(name) != nullptr) fail(ErrorCode::Internal, "duplicate parameter '" + name + "'");
  Parameter p;
  p.name = std::move(name);
  p.value = Matrix::Zero(rows, cols);
  p.grad = Matrix::Zero(rows, cols);
  p.adam_m = Matrix::Zero(rows, cols);
  p.adam_v = Matrix::Zero(rows, cols);
  p.init = init;
  p.fan_in = fan_in;
  p.fan_out = fan_out;
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterStore::entry_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void ParameterStore::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : params_) {
    p.adam_m.setZero();
    p.adam_v.setZero();
    p.grad.setZero();
    p.step_count = 0;
    if (p.init == InitKind::Zero) {
      p.value.setZero();
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(p.fan_in + p.fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
  }
}

void ParameterStore::fill_zero() {
  for (auto& p : params_) p.value.setZero();
}

}  // namespace ordino::nn
