// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "sbvqa/autodiff.hpp"

namespace sbvqa {

struct Parameter {
  std::string name;
  TracedTensor tensor;
};

/// Named, ordered collection of trainable tensors for one model.
class ParameterSet {
 public:
  TracedTensor& add(const std::string& name, Tensor init) {
    if (find(name)) throw TensorError("duplicate parameter name: " + name);
    params_.push_back({name, TracedTensor::from(std::move(init))});
    return params_.back().tensor;
  }

  TracedTensor* find(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return &p.tensor;
    return nullptr;
  }
  const TracedTensor* find(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return &p.tensor;
    return nullptr;
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.grad->fill(0.0);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.value->numel();
    return n;
  }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

}  // namespace sbvqa
