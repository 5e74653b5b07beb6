// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbvqa/adam.hpp"

#include <cmath>

namespace sbvqa {

void AdamState::step(ParameterSet& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.tensor.value->shape, 0.0);
      v_.emplace_back(p.tensor.value->shape, 0.0);
    }
  }
  if (m_.size() != params.size()) throw TensorError("adam state does not match parameter set");

  ++t_;
  const double lr_t = cfg_.decay > 0.0
                          ? cfg_.lr / (1.0 + cfg_.decay * static_cast<double>(t_))
                          : cfg_.lr;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.tensor.grad->all_finite())
      throw TensorError("NaN/Inf gradient in parameter " + p.name);
    double* val = p.tensor.value->data.data();
    const double* g = p.tensor.grad->data.data();
    double* m = m_[i].data.data();
    double* v = v_[i].data.data();
    const std::size_t n = p.tensor.value->numel();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      val[j] -= lr_t * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

}  // namespace sbvqa
