// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "sbvqa/params.hpp"

namespace sbvqa {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay = 0.0;
};

/// Adam with bias correction. Moment buffers are allocated on the first
/// step and keyed by parameter order, which is fixed per model.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParameterSet& params);

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t steps_taken() const { return t_; }
  const Tensor& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace sbvqa
