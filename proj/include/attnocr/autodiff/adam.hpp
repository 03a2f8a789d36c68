// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "attnocr/autodiff/tensor.hpp"

namespace attnocr {

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Coefficient of the L2 penalty lambda * sum(p^2); contributes 2 * lambda * p
  // to each gradient.
  double weight_decay = 0.0;
};

struct OptimizerState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  OptimizerState() = default;
  OptimizerState(AdamHyper h, std::span<Tensor* const> params) : hyper(h) {
    for (const Tensor* p : params) {
      first_moment.emplace_back(p->size(), 0.0);
      second_moment.emplace_back(p->size(), 0.0);
    }
  }
};

/// One bias-corrected Adam update using each parameter's Tensor::grad.
/// Gradients are read, not cleared.
inline void adam_step(std::span<Tensor* const> params, OptimizerState& state) {
  if (params.size() != state.first_moment.size() || params.size() != state.second_moment.size())
    fail(ErrorKind::shape, "adam_step: " + std::to_string(params.size()) + " parameters but state holds " +
                               std::to_string(state.first_moment.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = *params[i];
    if (p.grad.size() != p.size() || state.first_moment[i].size() != p.size() ||
        state.second_moment[i].size() != p.size())
      fail(ErrorKind::shape, "adam_step: parameter " + std::to_string(i) + " of shape " + shape_str(p.shape) +
                                 " disagrees with its gradient or moments");
  }

  const AdamHyper& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = p.grad[k] + 2.0 * h.weight_decay * p.values[k];
      m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g;
      v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.values[k] -= h.learning_rate * mhat / (std::sqrt(vhat) + h.epsilon);
    }
  }
}

}  // namespace attnocr
