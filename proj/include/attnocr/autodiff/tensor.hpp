// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "attnocr/error.hpp"

namespace attnocr {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

/// Dense row-major array of doubles. `grad` is allocated (same length as
/// `values`) exactly when `requires_grad` is set.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;

  Tensor() = default;

  explicit Tensor(Shape s, double fill = 0.0, bool needs_grad = false)
      : shape(std::move(s)), values(shape_size(shape), fill), requires_grad(needs_grad) {
    check_shape();
    if (requires_grad) grad.assign(values.size(), 0.0);
  }

  Tensor(Shape s, std::vector<double> v, bool needs_grad = false)
      : shape(std::move(s)), values(std::move(v)), requires_grad(needs_grad) {
    check_shape();
    if (shape_size(shape) != values.size())
      fail(ErrorKind::shape, "tensor of shape " + shape_str(shape) + " given " +
                                 std::to_string(values.size()) + " values");
    if (requires_grad) grad.assign(values.size(), 0.0);
  }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  std::span<double> data() { return values; }
  std::span<const double> data() const { return values; }

  void set_requires_grad(bool on) {
    requires_grad = on;
    if (on)
      grad.assign(values.size(), 0.0);
    else
      grad.clear();
  }

  void zero_grad() {
    if (requires_grad) std::fill(grad.begin(), grad.end(), 0.0);
  }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  void check_shape() const {
    for (std::size_t d : shape)
      if (d == 0) fail(ErrorKind::shape, "tensor dimensions must be positive, got " + shape_str(shape));
  }
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out,
                             std::mt19937_64& rng) {
  Tensor t(std::move(shape), 0.0, true);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.values) v = dist(rng);
  return t;
}

inline Tensor zeros_param(Shape shape) { return Tensor(std::move(shape), 0.0, true); }

}  // namespace attnocr
