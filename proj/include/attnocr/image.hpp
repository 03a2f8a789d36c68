// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "attnocr/autodiff/tensor.hpp"

namespace attnocr {

/// Single-channel image, row-major, intensities in [0, 1].
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}

  double& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  /// As an [H x W x 1] tensor.
  Tensor to_tensor() const { return Tensor({height, width, 1}, pixels); }

  bool operator==(const GrayImage&) const = default;
};

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Binary PGM (P5), maxval 255.
inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<char> bytes(img.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<char>(to_byte(img.pixels[i]));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "short write on " + path);
}

namespace detail {

inline std::string pgm_token(std::istream& in, const std::string& path) {
  std::string tok;
  for (;;) {
    int c = in.peek();
    if (c == EOF) fail(ErrorKind::format, path + ": truncated PGM header");
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  while (in.peek() != EOF && !std::isspace(in.peek())) tok.push_back(static_cast<char>(in.get()));
  return tok;
}

}  // namespace detail

/// Reads an 8-bit P5 file and normalizes to [0, 1].
inline GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  if (detail::pgm_token(in, path) != "P5") fail(ErrorKind::format, path + ": not a binary PGM (P5)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(detail::pgm_token(in, path));
    h = std::stoul(detail::pgm_token(in, path));
    maxval = std::stoul(detail::pgm_token(in, path));
  } catch (const std::logic_error&) {
    fail(ErrorKind::format, path + ": malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255)
    fail(ErrorKind::format, path + ": unsupported PGM geometry or maxval (8-bit only)");
  in.get();  // single whitespace before the raster
  std::vector<char> bytes(w * h);
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    fail(ErrorKind::format, path + ": truncated PGM raster");
  GrayImage img(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    img.pixels[i] = static_cast<double>(static_cast<unsigned char>(bytes[i])) / static_cast<double>(maxval);
  return img;
}

}  // namespace attnocr
