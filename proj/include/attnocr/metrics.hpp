// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "attnocr/geometry.hpp"
#include "attnocr/utf8.hpp"

namespace attnocr {

// ---------------------------------------------------------------------------
// Edit distance
// ---------------------------------------------------------------------------

/// Minimum number of single-character insertions, deletions and
/// substitutions turning a into b. Two-row dynamic programme.
inline std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::size_t levenshtein_utf8(std::string_view a, std::string_view b) {
  return levenshtein(utf8::decode(a), utf8::decode(b));
}

/// D(s, s_hat) / max(|s|, |s_hat|), with 0 for two empty strings.
inline double normalized_edit_distance(std::u32string_view pred, std::u32string_view gt) {
  const std::size_t longest = std::max(pred.size(), gt.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(pred, gt)) / static_cast<double>(longest);
}

/// 1 - mean normalized edit distance over (prediction, ground truth) pairs,
/// lengths counted in code points.
inline double one_minus_ned(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) fail(ErrorKind::shape, "one_minus_ned: no pairs");
  double total = 0.0;
  for (const auto& [pred, gt] : pairs) total += normalized_edit_distance(utf8::decode(pred), utf8::decode(gt));
  return 1.0 - total / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Polygons
// ---------------------------------------------------------------------------

struct Point {
  double x = 0, y = 0;
  bool operator==(const Point&) const = default;
};

using Polygon = std::vector<Point>;

inline double polygon_area(const Polygon& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point& a = p[i];
    const Point& b = p[(i + 1) % p.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(s);
}

namespace detail {

inline int orientation(const Point& a, const Point& b, const Point& c) {
  const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  return (v > 0) - (v < 0);
}

inline bool on_segment(const Point& a, const Point& b, const Point& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

/// Closed-segment intersection, collinear overlaps included.
inline bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
  const int o1 = orientation(p1, p2, q1), o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1), o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

}  // namespace detail

/// True when two non-adjacent edges touch or cross.
inline bool polygon_self_intersects(const Polygon& p) {
  const std::size_t n = p.size();
  if (n < 4) return false;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (detail::segments_intersect(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n])) return true;
    }
  return false;
}

namespace detail {

/// Cell-index ranges [lo, hi) of a row whose centres lie inside p (even-odd).
inline std::vector<std::pair<long, long>> row_spans(const Polygon& p, double yc, double x0, double cpu, long nx) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point& a = p[i];
    const Point& b = p[(i + 1) % p.size()];
    if ((a.y <= yc) != (b.y <= yc)) xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
  }
  std::sort(xs.begin(), xs.end());
  std::vector<std::pair<long, long>> spans;
  for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
    // centres x0 + (i + 0.5) / cpu inside [xs[k], xs[k+1])
    long lo = static_cast<long>(std::ceil((xs[k] - x0) * cpu - 0.5));
    long hi = static_cast<long>(std::ceil((xs[k + 1] - x0) * cpu - 0.5));
    lo = std::clamp(lo, 0L, nx);
    hi = std::clamp(hi, 0L, nx);
    if (hi > lo) spans.emplace_back(lo, hi);
  }
  return spans;
}

inline long spans_length(const std::vector<std::pair<long, long>>& s) {
  long n = 0;
  for (auto [lo, hi] : s) n += hi - lo;
  return n;
}

inline long spans_overlap(const std::vector<std::pair<long, long>>& a, const std::vector<std::pair<long, long>>& b) {
  long n = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const long lo = std::max(a[i].first, b[j].first), hi = std::min(a[i].second, b[j].second);
    if (hi > lo) n += hi - lo;
    if (a[i].second < b[j].second)
      ++i;
    else
      ++j;
  }
  return n;
}

}  // namespace detail

/// IoU of the cell sets covered by a and b on a grid of `cells_per_unit`
/// cells per coordinate unit spanning their joint bounding box. A cell is
/// covered when its centre is inside (even-odd rule).
inline double rasterized_polygon_iou(const Polygon& a, const Polygon& b, double cells_per_unit) {
  if (!(cells_per_unit > 0)) fail(ErrorKind::config, "rasterized_polygon_iou: cells_per_unit must be positive");
  if (a.size() < 3 || b.size() < 3 || polygon_area(a) == 0.0 || polygon_area(b) == 0.0) return 0.0;
  double minx = a[0].x, maxx = a[0].x, miny = a[0].y, maxy = a[0].y;
  for (const Polygon* p : {&a, &b})
    for (const Point& q : *p) {
      minx = std::min(minx, q.x);
      maxx = std::max(maxx, q.x);
      miny = std::min(miny, q.y);
      maxy = std::max(maxy, q.y);
    }
  const long nx = std::max(1L, static_cast<long>(std::ceil((maxx - minx) * cells_per_unit)));
  const long ny = std::max(1L, static_cast<long>(std::ceil((maxy - miny) * cells_per_unit)));
  long in_a = 0, in_b = 0, both = 0;
  for (long r = 0; r < ny; ++r) {
    const double yc = miny + (static_cast<double>(r) + 0.5) / cells_per_unit;
    const auto sa = detail::row_spans(a, yc, minx, cells_per_unit, nx);
    const auto sb = detail::row_spans(b, yc, minx, cells_per_unit, nx);
    in_a += detail::spans_length(sa);
    in_b += detail::spans_length(sb);
    both += detail::spans_overlap(sa, sb);
  }
  const long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Spotting records and files
// ---------------------------------------------------------------------------

/// One text region with its transcription. `image` is set only for dataset
/// index lines, which carry the image path as a leading field.
struct SpottingRecord {
  std::string image;
  Polygon polygon;
  std::string text;  // UTF-8

  bool operator==(const SpottingRecord&) const = default;
};

inline std::string format_polygon(const Polygon& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ",";
    s += format_real(p[i].x) + "," + format_real(p[i].y);
  }
  return s;
}

inline Polygon parse_polygon(std::string_view s) {
  const std::vector<double> v = parse_real_list(s);
  if (v.size() % 2 != 0 || v.size() < 6)
    fail(ErrorKind::format, "polygon needs at least 3 x,y pairs: '" + std::string(s) + "'");
  Polygon p;
  for (std::size_t i = 0; i < v.size(); i += 2) p.push_back({v[i], v[i + 1]});
  if (polygon_self_intersects(p)) fail(ErrorKind::format, "self-intersecting polygon: '" + std::string(s) + "'");
  return p;
}

/// "x1,y1,...,xn,yn<TAB>text", optionally preceded by "image<TAB>".
inline std::string format_spotting_line(const SpottingRecord& r) {
  std::string s;
  if (!r.image.empty()) s += r.image + "\t";
  return s + format_polygon(r.polygon) + "\t" + r.text;
}

inline SpottingRecord parse_spotting_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  SpottingRecord r;
  if (fields.size() == 2) {
    r.polygon = parse_polygon(fields[0]);
    r.text = std::string(fields[1]);
  } else if (fields.size() == 3) {
    if (fields[0].empty()) fail(ErrorKind::format, "empty image field");
    r.image = std::string(fields[0]);
    r.polygon = parse_polygon(fields[1]);
    r.text = std::string(fields[2]);
  } else {
    fail(ErrorKind::format, "expected 'polygon<TAB>text' or 'image<TAB>polygon<TAB>text', got " +
                                std::to_string(fields.size()) + " fields");
  }
  utf8::decode(r.text);  // validates encoding
  return r;
}

inline std::vector<SpottingRecord> read_spotting_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::vector<SpottingRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    try {
      out.push_back(parse_spotting_line(line));
    } catch (const Error& e) {
      fail(e.kind(), path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_spotting_file(const std::string& path, const std::vector<SpottingRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  for (const SpottingRecord& r : records) out << format_spotting_line(r) << '\n';
}

// ---------------------------------------------------------------------------
// End-to-end evaluation
// ---------------------------------------------------------------------------

struct PairDetail {
  long gt = -1;    // -1 for an unmatched prediction
  long pred = -1;  // -1 for an unmatched ground truth
  double iou = 0.0;
  std::string gt_text;
  std::string pred_text;
  std::size_t edit_distance = 0;
  bool text_match = false;
};

struct EvalReport {
  double recall = 0.0;
  double precision = 0.0;
  double hmean = 0.0;
  double one_minus_ned = 0.0;
  std::size_t num_gt = 0;
  std::size_t num_pred = 0;
  std::size_t true_positives = 0;
  std::vector<PairDetail> pairs;
};

inline double harmonic_mean(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Resolution giving ~256 cells along the longer side of the joint box.
inline double adaptive_cells_per_unit(const Polygon& a, const Polygon& b) {
  double minx = a[0].x, maxx = a[0].x, miny = a[0].y, maxy = a[0].y;
  for (const Polygon* p : {&a, &b})
    for (const Point& q : *p) {
      minx = std::min(minx, q.x);
      maxx = std::max(maxx, q.x);
      miny = std::min(miny, q.y);
      maxy = std::max(maxy, q.y);
    }
  const double extent = std::max(maxx - minx, maxy - miny);
  return extent > 0.0 ? 256.0 / extent : 1.0;
}

/// Greedy one-to-one matching in descending IoU (ties: lower gt, then lower
/// prediction index) among pairs with IoU >= iou_thresh. A matched pair is a
/// true positive when the texts are identical. 1-N.E.D covers matched pairs
/// plus every unmatched gt and prediction scored against "". With no gts and
/// no predictions everything is reported as 1.
inline EvalReport evaluate_spotting(const std::vector<SpottingRecord>& preds, const std::vector<SpottingRecord>& gts,
                                    double iou_thresh = 0.5) {
  EvalReport rep;
  rep.num_gt = gts.size();
  rep.num_pred = preds.size();
  if (gts.empty() && preds.empty()) {
    rep.recall = rep.precision = rep.hmean = rep.one_minus_ned = 1.0;
    return rep;
  }

  struct Candidate {
    double iou;
    std::size_t g, p;
  };
  std::vector<Candidate> cands;
  for (std::size_t g = 0; g < gts.size(); ++g)
    for (std::size_t p = 0; p < preds.size(); ++p) {
      const Polygon& a = gts[g].polygon;
      const Polygon& b = preds[p].polygon;
      const double iou = rasterized_polygon_iou(a, b, adaptive_cells_per_unit(a, b));
      if (iou >= iou_thresh) cands.push_back({iou, g, p});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    if (x.iou != y.iou) return x.iou > y.iou;
    if (x.g != y.g) return x.g < y.g;
    return x.p < y.p;
  });

  std::vector<bool> gt_used(gts.size(), false), pred_used(preds.size(), false);
  double ned_total = 0.0;
  for (const Candidate& c : cands) {
    if (gt_used[c.g] || pred_used[c.p]) continue;
    gt_used[c.g] = pred_used[c.p] = true;
    PairDetail d;
    d.gt = static_cast<long>(c.g);
    d.pred = static_cast<long>(c.p);
    d.iou = c.iou;
    d.gt_text = gts[c.g].text;
    d.pred_text = preds[c.p].text;
    const auto gt32 = utf8::decode(d.gt_text), pr32 = utf8::decode(d.pred_text);
    d.edit_distance = levenshtein(pr32, gt32);
    d.text_match = d.gt_text == d.pred_text;
    if (d.text_match) ++rep.true_positives;
    ned_total += normalized_edit_distance(pr32, gt32);
    rep.pairs.push_back(std::move(d));
  }
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!gt_used[g]) {
      PairDetail d;
      d.gt = static_cast<long>(g);
      d.gt_text = gts[g].text;
      const auto gt32 = utf8::decode(d.gt_text);
      d.edit_distance = gt32.size();
      ned_total += normalized_edit_distance(U"", gt32);
      rep.pairs.push_back(std::move(d));
    }
  for (std::size_t p = 0; p < preds.size(); ++p)
    if (!pred_used[p]) {
      PairDetail d;
      d.pred = static_cast<long>(p);
      d.pred_text = preds[p].text;
      const auto pr32 = utf8::decode(d.pred_text);
      d.edit_distance = pr32.size();
      ned_total += normalized_edit_distance(pr32, U"");
      rep.pairs.push_back(std::move(d));
    }

  const double tp = static_cast<double>(rep.true_positives);
  rep.precision = preds.empty() ? 0.0 : tp / static_cast<double>(preds.size());
  rep.recall = gts.empty() ? 0.0 : tp / static_cast<double>(gts.size());
  rep.hmean = harmonic_mean(rep.precision, rep.recall);
  rep.one_minus_ned = 1.0 - ned_total / static_cast<double>(rep.pairs.size());
  return rep;
}

}  // namespace attnocr
