// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <vector>

#include "attnocr/autodiff/ops.hpp"
#include "attnocr/image.hpp"

namespace attnocr {

/// Layout of the convolutional stack:
///   conv3x3(stem) -> tanh
///   [conv1x3 + conv3x1](asym), branches summed -> tanh
///   conv3x3 stride 2 per entry of `down` -> tanh
/// Feature depth is down.back() (or asym when `down` is empty).
struct EncoderConfig {
  std::size_t input_height = 32;
  std::size_t input_width = 96;
  std::size_t stem_channels = 16;
  std::size_t asym_channels = 32;
  std::vector<std::size_t> down_channels{32, 64, 64};

  std::size_t depth() const { return down_channels.empty() ? asym_channels : down_channels.back(); }

  /// Spatial size of V for the configured input.
  std::pair<std::size_t, std::size_t> feature_dims() const {
    std::size_t h = input_height, w = input_width;
    for (std::size_t i = 0; i < down_channels.size(); ++i) {
      h = conv_axis(h, 3, 2, Padding::same).out;
      w = conv_axis(w, 3, 2, Padding::same).out;
    }
    return {h, w};
  }
};

struct ConvLayer {
  Tensor kernel;  // [kh x kw x c_in x c_out]
  Tensor bias;    // [1 x c_out]
};

struct EncoderParams {
  ConvLayer stem;
  Tensor asym_row;  // [1 x 3 x stem x asym]
  Tensor asym_col;  // [3 x 1 x stem x asym]
  Tensor asym_bias;
  std::vector<ConvLayer> down;

  EncoderParams() = default;

  EncoderParams(const EncoderConfig& cfg, std::mt19937_64& rng) {
    auto conv = [&](std::size_t kh, std::size_t kw, std::size_t ci, std::size_t co) {
      return glorot_uniform({kh, kw, ci, co}, kh * kw * ci, kh * kw * co, rng);
    };
    stem = {conv(3, 3, 1, cfg.stem_channels), zeros_param({1, cfg.stem_channels})};
    asym_row = conv(1, 3, cfg.stem_channels, cfg.asym_channels);
    asym_col = conv(3, 1, cfg.stem_channels, cfg.asym_channels);
    asym_bias = zeros_param({1, cfg.asym_channels});
    std::size_t c = cfg.asym_channels;
    for (std::size_t co : cfg.down_channels) {
      down.push_back({conv(3, 3, c, co), zeros_param({1, co})});
      c = co;
    }
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "stem.kernel", stem.kernel);
    f(prefix + "stem.bias", stem.bias);
    f(prefix + "asym.row_kernel", asym_row);
    f(prefix + "asym.col_kernel", asym_col);
    f(prefix + "asym.bias", asym_bias);
    for (std::size_t i = 0; i < down.size(); ++i) {
      f(prefix + "down" + std::to_string(i) + ".kernel", down[i].kernel);
      f(prefix + "down" + std::to_string(i) + ".bias", down[i].bias);
    }
  }
};

namespace detail {

/// Adds a per-channel bias to x [h x w x c] and applies tanh.
inline Var bias_tanh(Var x, Var bias) {
  const Shape s = x.shape();
  Var flat = reshape(x, {s[0] * s[1], s[2]});
  return reshape(tanh(add_bias(flat, bias)), s);
}

}  // namespace detail

/// Feature map V [h x w x d] for one image.
inline Var encode_image(Tape& tape, const GrayImage& img, EncoderParams& p, const EncoderConfig& cfg) {
  if (img.height != cfg.input_height || img.width != cfg.input_width)
    fail(ErrorKind::shape, "encoder expects " + std::to_string(cfg.input_height) + "x" +
                               std::to_string(cfg.input_width) + " input, got " + std::to_string(img.height) +
                               "x" + std::to_string(img.width));
  Var x = tape.constant(img.to_tensor());
  x = detail::bias_tanh(conv2d(x, tape.param(p.stem.kernel), 1, Padding::same), tape.param(p.stem.bias));
  Var row = conv2d(x, tape.param(p.asym_row), 1, Padding::same);
  Var col = conv2d(x, tape.param(p.asym_col), 1, Padding::same);
  x = detail::bias_tanh(add(row, col), tape.param(p.asym_bias));
  for (ConvLayer& layer : p.down)
    x = detail::bias_tanh(conv2d(x, tape.param(layer.kernel), 2, Padding::same), tape.param(layer.bias));
  return x;
}

/// Maps the global feature (spatial mean of V) to the initial LSTM state.
struct StateInitParams {
  Tensor weight;  // [d x hidden]
  Tensor bias;    // [1 x hidden]

  StateInitParams() = default;
  StateInitParams(std::size_t depth, std::size_t hidden, std::mt19937_64& rng)
      : weight(glorot_uniform({depth, hidden}, depth, hidden, rng)), bias(zeros_param({1, hidden})) {}

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "weight", weight);
    f(prefix + "bias", bias);
  }
};

struct InitialState {
  Var h;     // [1 x hidden]
  Var cell;  // [1 x hidden]
};

/// h0 = tanh(meanpool(V) * W + b); cell0 = 0.
inline InitialState init_decoder_state(Var V, StateInitParams& p) {
  Tape& tape = *V.tape;
  const Shape s = V.shape();
  Var pooled = mean_rows(reshape(V, {s[0] * s[1], s[2]}));
  Var h = tanh(add_bias(matmul(pooled, tape.param(p.weight)), tape.param(p.bias)));
  Var cell = tape.constant(Tensor({1, p.weight.dim(1)}, 0.0));
  return {h, cell};
}

}  // namespace attnocr
