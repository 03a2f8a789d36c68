// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "attnocr/error.hpp"

namespace attnocr {

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  bool valid() const { return x1 <= x2 && y1 <= y2; }

  bool operator==(const Box&) const = default;
};

/// Anchor ratios (h / w) tuned for long text lines.
inline const std::vector<double> kTextAnchorRatios{1.0 / 9, 1.0 / 4, 1.0 / 2, 1.0, 2.0, 4.0, 9.0};
inline const std::vector<double> kDefaultAnchorRatios{0.5, 1.0, 2.0};

struct AnchorGrid {
  double stride = 0;
  std::vector<double> scales;
  std::vector<double> ratios;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::vector<Box> anchors;  // cell-major, then scale, then ratio
};

/// Anchors centred on ((j + 0.5) stride, (i + 0.5) stride). For ratio r = h/w
/// and scale s the box is s / sqrt(r) wide and s * sqrt(r) tall, so every
/// anchor of one scale has area s^2.
inline AnchorGrid generate_anchors(std::size_t grid_h, std::size_t grid_w, double stride,
                                   const std::vector<double>& scales, const std::vector<double>& ratios) {
  if (grid_h == 0 || grid_w == 0 || !(stride > 0) || scales.empty() || ratios.empty())
    fail(ErrorKind::config, "generate_anchors: grid, stride, scales and ratios must be positive and non-empty");
  for (double s : scales)
    if (!(s > 0)) fail(ErrorKind::config, "generate_anchors: scale must be positive");
  for (double r : ratios)
    if (!(r > 0)) fail(ErrorKind::config, "generate_anchors: ratio must be positive");
  AnchorGrid g{stride, scales, ratios, grid_h, grid_w, {}};
  g.anchors.reserve(grid_h * grid_w * scales.size() * ratios.size());
  for (std::size_t i = 0; i < grid_h; ++i)
    for (std::size_t j = 0; j < grid_w; ++j) {
      const double cx = (static_cast<double>(j) + 0.5) * stride;
      const double cy = (static_cast<double>(i) + 0.5) * stride;
      for (double s : scales)
        for (double r : ratios) {
          const double w = s / std::sqrt(r), h = s * std::sqrt(r);
          g.anchors.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
        }
    }
  return g;
}

/// Intersection over union; 0 when either box has no area.
inline double box_iou(const Box& a, const Box& b) {
  const double aa = a.area(), ba = b.area();
  if (aa <= 0.0 || ba <= 0.0) return 0.0;
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (aa + ba - inter);
}

enum class AnchorLabel { negative, ignore, positive };

struct MatchResult {
  std::vector<AnchorLabel> labels;
  std::vector<long> matched_gt;  // -1 unless positive
};

/// Positive: IoU >= pos_thresh with some gt, or the highest-IoU anchor of some
/// gt (ties all count; gts with no overlapping anchor are skipped).
/// Negative: max IoU < neg_thresh and not positive. Anything else is ignored.
/// A positive's gt is its own highest-IoU gt (lowest index on ties), except
/// when it only qualifies through the best-match rule, where it takes the
/// first gt it is best for.
inline MatchResult match_anchors(const std::vector<Box>& anchors, const std::vector<Box>& gts,
                                 double pos_thresh = 0.7, double neg_thresh = 0.3) {
  if (anchors.empty()) fail(ErrorKind::shape, "match_anchors: no anchors");
  if (!(neg_thresh > 0.0 && pos_thresh < 1.0 && neg_thresh < pos_thresh))
    fail(ErrorKind::config, "match_anchors: thresholds must satisfy 0 < neg < pos < 1");
  const std::size_t A = anchors.size(), G = gts.size();
  MatchResult r{std::vector<AnchorLabel>(A, AnchorLabel::negative), std::vector<long>(A, -1)};
  if (G == 0) return r;

  std::vector<double> iou(A * G);
  std::vector<double> best_for_gt(G, 0.0);
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t g = 0; g < G; ++g) {
      const double v = box_iou(anchors[a], gts[g]);
      iou[a * G + g] = v;
      best_for_gt[g] = std::max(best_for_gt[g], v);
    }

  for (std::size_t a = 0; a < A; ++a) {
    const double* row = &iou[a * G];
    const std::size_t arg = static_cast<std::size_t>(std::max_element(row, row + G) - row);
    const double best = row[arg];
    if (best >= pos_thresh) {
      r.labels[a] = AnchorLabel::positive;
      r.matched_gt[a] = static_cast<long>(arg);
      continue;
    }
    for (std::size_t g = 0; g < G; ++g)
      if (best_for_gt[g] > 0.0 && row[g] == best_for_gt[g]) {
        r.labels[a] = AnchorLabel::positive;
        r.matched_gt[a] = static_cast<long>(g);
        break;
      }
    if (r.labels[a] == AnchorLabel::positive) continue;
    r.labels[a] = best < neg_thresh ? AnchorLabel::negative : AnchorLabel::ignore;
  }
  return r;
}

using BoxDeltas = std::array<double, 4>;

/// (dx, dy, dw, dh): centre offsets over anchor size, log size ratios.
inline BoxDeltas encode_box_deltas(const Box& anchor, const Box& gt) {
  if (!(anchor.width() > 0 && anchor.height() > 0)) fail(ErrorKind::shape, "encode_box_deltas: zero-area anchor");
  if (!(gt.width() > 0 && gt.height() > 0)) fail(ErrorKind::shape, "encode_box_deltas: zero-area ground truth");
  return {(gt.cx() - anchor.cx()) / anchor.width(), (gt.cy() - anchor.cy()) / anchor.height(),
          std::log(gt.width() / anchor.width()), std::log(gt.height() / anchor.height())};
}

inline Box decode_box_deltas(const Box& anchor, const BoxDeltas& d) {
  if (!(anchor.width() > 0 && anchor.height() > 0)) fail(ErrorKind::shape, "decode_box_deltas: zero-area anchor");
  const double cx = anchor.cx() + d[0] * anchor.width();
  const double cy = anchor.cy() + d[1] * anchor.height();
  const double w = anchor.width() * std::exp(d[2]);
  const double h = anchor.height() * std::exp(d[3]);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

/// Shortest round-trip decimal form.
inline std::string format_real(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_real(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(ErrorKind::format, "not a number: '" + std::string(s) + "'");
  return v;
}

inline std::vector<double> parse_real_list(std::string_view s) {
  std::vector<double> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = s.find(',', start);
    out.push_back(parse_real(s.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                              : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// "x1,y1,x2,y2"
inline std::string format_box(const Box& b) {
  return format_real(b.x1) + "," + format_real(b.y1) + "," + format_real(b.x2) + "," + format_real(b.y2);
}

inline Box parse_box(std::string_view s) {
  const std::vector<double> v = parse_real_list(s);
  if (v.size() != 4) fail(ErrorKind::format, "box needs 4 comma-separated reals: '" + std::string(s) + "'");
  Box b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) fail(ErrorKind::format, "box with x2 < x1 or y2 < y1: '" + std::string(s) + "'");
  return b;
}

}  // namespace attnocr
