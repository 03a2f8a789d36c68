// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "attnocr/image.hpp"
#include "attnocr/metrics.hpp"
#include "attnocr/utf8.hpp"

namespace attnocr {

// ---------------------------------------------------------------------------
// 5x7 bitmap font
// ---------------------------------------------------------------------------

inline constexpr std::size_t kGlyphWidth = 5;
inline constexpr std::size_t kGlyphHeight = 7;
inline constexpr std::size_t kGlyphAdvance = kGlyphWidth + 1;

class GlyphFont {
 public:
  using Pattern = std::array<std::string_view, kGlyphHeight>;

  /// Uppercase Latin letters and digits.
  static const GlyphFont& standard() {
    static const GlyphFont font = [] {
      GlyphFont f;
      auto add = [&](char32_t c, Pattern p) { f.glyphs_[c] = p; };
      add(U'A', {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"});
      add(U'B', {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."});
      add(U'C', {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."});
      add(U'D', {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."});
      add(U'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"});
      add(U'F', {"#####", "#....", "#....", "####.", "#....", "#....", "#...."});
      add(U'G', {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"});
      add(U'H', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"});
      add(U'I', {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."});
      add(U'J', {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."});
      add(U'K', {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"});
      add(U'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"});
      add(U'M', {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"});
      add(U'N', {"#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"});
      add(U'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."});
      add(U'P', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."});
      add(U'Q', {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"});
      add(U'R', {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"});
      add(U'S', {".####", "#....", "#....", ".###.", "....#", "....#", "####."});
      add(U'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."});
      add(U'U', {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."});
      add(U'V', {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."});
      add(U'W', {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."});
      add(U'X', {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"});
      add(U'Y', {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."});
      add(U'Z', {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"});
      add(U'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."});
      add(U'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."});
      add(U'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"});
      add(U'3', {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."});
      add(U'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."});
      add(U'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."});
      add(U'6', {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."});
      add(U'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."});
      add(U'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."});
      add(U'9', {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."});
      return f;
    }();
    return font;
  }

  bool has(char32_t c) const { return glyphs_.count(c) != 0; }

  const Pattern& pattern(char32_t c) const {
    auto it = glyphs_.find(c);
    if (it == glyphs_.end())
      fail(ErrorKind::format, "no glyph for character '" + utf8::encode(std::u32string(1, c)) + "'");
    return it->second;
  }

  bool lit(char32_t c, std::size_t row, std::size_t col) const { return pattern(c)[row][col] == '#'; }

 private:
  std::map<char32_t, Pattern> glyphs_;
};

// ---------------------------------------------------------------------------
// Affine augmentation
// ---------------------------------------------------------------------------

struct AffineParams {
  double rotation = 0.0;  // radians, positive turns +x towards +y (image y points down)
  double dx = 0.0;
  double dy = 0.0;
  double shear = 0.0;  // x += shear * y
  double scale = 1.0;
};

/// Linear part: rotate * shear * scale.
inline std::array<double, 4> affine_matrix(const AffineParams& a) {
  const double c = std::cos(a.rotation), s = std::sin(a.rotation);
  // [c -s; s c] * [1 sh; 0 1] * scale
  return {a.scale * c, a.scale * (c * a.shear - s), a.scale * s, a.scale * (s * a.shear + c)};
}

/// scale -> shear -> rotate -> translate.
inline Point apply_affine(const Point& p, const AffineParams& a) {
  const double sx = a.scale * p.x, sy = a.scale * p.y;
  const double hx = sx + a.shear * sy, hy = sy;
  const double c = std::cos(a.rotation), s = std::sin(a.rotation);
  return {c * hx - s * hy + a.dx, s * hx + c * hy + a.dy};
}

inline Point invert_affine(const Point& q, const AffineParams& a) {
  const auto m = affine_matrix(a);
  const double det = m[0] * m[3] - m[1] * m[2];
  const double x = q.x - a.dx, y = q.y - a.dy;
  return {(m[3] * x - m[1] * y) / det, (-m[2] * x + m[0] * y) / det};
}

struct AugmentRanges {
  double max_rotation = 30.0 * std::numbers::pi / 180.0;
  double max_shear = 0.2;
  double min_scale = 0.8;
  double max_scale = 1.3;
  double max_translate_frac = 0.1;  // of canvas width / height
  double intensity_jitter = 0.2;
};

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

struct RenderOptions {
  std::size_t canvas_height = 32;
  std::size_t canvas_width = 96;
  double base_scale = 1.5;   // image pixels per font pixel before augmentation
  std::size_t supersample = 4;
  double jitter = 0.2;       // foreground intensity is 0.8 +- jitter
};

struct SampleRecord {
  GrayImage image;
  Polygon polygon;  // transformed text box, clockwise from top-left
  std::string transcription;
  std::uint64_t seed = 0;
};

class CanvasOverflow : public Error {
 public:
  explicit CanvasOverflow(const std::string& what) : Error(ErrorKind::config, what) {}
};

namespace detail {

struct TextLayout {
  double text_w;  // font pixels
  double text_h;
  Point center;   // canvas position of the text-box centre
};

inline TextLayout layout_text(std::size_t n, const RenderOptions& o) {
  const double tw = static_cast<double>(n * kGlyphAdvance - 1);
  const double th = static_cast<double>(kGlyphHeight);
  const double ax = std::floor((static_cast<double>(o.canvas_width) - tw * o.base_scale) / 2.0);
  const double ay = std::floor((static_cast<double>(o.canvas_height) - th * o.base_scale) / 2.0);
  return {tw, th, {ax + tw * o.base_scale / 2.0, ay + th * o.base_scale / 2.0}};
}

/// Font-pixel coordinates (u right, v down, origin at the text box corner)
/// to canvas coordinates.
inline Point text_to_canvas(double u, double v, const TextLayout& L, const AffineParams& a, const RenderOptions& o) {
  const Point local{(u - L.text_w / 2.0) * o.base_scale, (v - L.text_h / 2.0) * o.base_scale};
  const Point q = apply_affine(local, a);
  return {q.x + L.center.x, q.y + L.center.y};
}

}  // namespace detail

/// The four canvas-space corners of the text box for `n` glyphs.
inline Polygon text_box_polygon(std::size_t n, const AffineParams& a, const RenderOptions& o) {
  const auto L = detail::layout_text(n, o);
  return {detail::text_to_canvas(0, 0, L, a, o), detail::text_to_canvas(L.text_w, 0, L, a, o),
          detail::text_to_canvas(L.text_w, L.text_h, L, a, o), detail::text_to_canvas(0, L.text_h, L, a, o)};
}

/// Renders `text` with the given transform. Pixel intensity is the fraction
/// of supersample points that land on lit font pixels, times a foreground
/// level drawn from `seed`. Background is 0.
inline SampleRecord render_sample(std::string_view text_utf8, const AffineParams& params, const RenderOptions& opt,
                                  std::uint64_t seed, const GlyphFont& font = GlyphFont::standard()) {
  const std::u32string text = utf8::decode(text_utf8);
  if (text.empty()) fail(ErrorKind::config, "render_sample: empty text");
  if (!(params.scale > 0)) fail(ErrorKind::config, "render_sample: scale must be positive");
  for (char32_t c : text) font.pattern(c);

  SampleRecord rec;
  rec.transcription = std::string(text_utf8);
  rec.seed = seed;
  rec.polygon = text_box_polygon(text.size(), params, opt);
  const double W = static_cast<double>(opt.canvas_width), H = static_cast<double>(opt.canvas_height);
  for (const Point& p : rec.polygon)
    if (p.x < 0 || p.y < 0 || p.x > W || p.y > H)
      throw CanvasOverflow("text '" + rec.transcription + "' overflows the " + std::to_string(opt.canvas_height) +
                           "x" + std::to_string(opt.canvas_width) + " canvas");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-opt.jitter, opt.jitter);
  const double fg = std::clamp(0.8 + jitter(rng), 0.0, 1.0);

  const auto L = detail::layout_text(text.size(), opt);
  AffineParams to_font = params;  // canvas -> centred local -> font pixels
  rec.image = GrayImage(opt.canvas_height, opt.canvas_width);
  const std::size_t S = opt.supersample;
  const double inv_samples = 1.0 / static_cast<double>(S * S);

  // Only pixels inside the polygon's bounding box can be lit.
  double minx = W, maxx = 0, miny = H, maxy = 0;
  for (const Point& p : rec.polygon) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(miny)));
  const auto y1 = static_cast<std::size_t>(std::min(H, std::ceil(maxy)));
  const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(minx)));
  const auto x1 = static_cast<std::size_t>(std::min(W, std::ceil(maxx)));
  for (std::size_t y = y0; y < y1; ++y)
    for (std::size_t x = x0; x < x1; ++x) {
      std::size_t hits = 0;
      for (std::size_t sy = 0; sy < S; ++sy)
        for (std::size_t sx = 0; sx < S; ++sx) {
          const Point q{static_cast<double>(x) + (static_cast<double>(sx) + 0.5) / static_cast<double>(S) - L.center.x,
                        static_cast<double>(y) + (static_cast<double>(sy) + 0.5) / static_cast<double>(S) - L.center.y};
          const Point local = invert_affine(q, to_font);
          const double u = local.x / opt.base_scale + L.text_w / 2.0;
          const double v = local.y / opt.base_scale + L.text_h / 2.0;
          if (u < 0 || v < 0 || u >= L.text_w || v >= L.text_h) continue;
          const auto col = static_cast<std::size_t>(u), row = static_cast<std::size_t>(v);
          const std::size_t glyph = col / kGlyphAdvance, gx = col % kGlyphAdvance;
          if (gx >= kGlyphWidth) continue;
          if (font.lit(text[glyph], row, gx)) ++hits;
        }
      rec.image.at(y, x) = fg * static_cast<double>(hits) * inv_samples;
    }
  return rec;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

/// SplitMix64 finalizer; sample i is seeded with splitmix(master ^ splitmix(i)).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t sample_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index));
}

inline AffineParams sample_affine(std::mt19937_64& rng, const AugmentRanges& r, const RenderOptions& o) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  AffineParams a;
  a.rotation = r.max_rotation * unit(rng);
  a.shear = r.max_shear * unit(rng);
  a.scale = std::uniform_real_distribution<double>(r.min_scale, r.max_scale)(rng);
  a.dx = r.max_translate_frac * static_cast<double>(o.canvas_width) * unit(rng);
  a.dy = r.max_translate_frac * static_cast<double>(o.canvas_height) * unit(rng);
  return a;
}

struct DatasetSpec {
  std::size_t count = 1;
  std::string charset{"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"};
  std::size_t min_length = 1;
  std::size_t max_length = 8;
  std::uint64_t seed = 0;
  RenderOptions render;
  AugmentRanges ranges;
  std::size_t max_attempts = 200;
};

inline constexpr const char* kIndexFileName = "index.tsv";

/// Draws the text and transform for sample `i`, resampling the transform
/// until the text fits. Falls back to the identity transform after
/// `max_attempts` draws.
inline SampleRecord make_sample(const DatasetSpec& spec, std::size_t i) {
  const std::u32string chars = utf8::decode(spec.charset);
  const std::uint64_t seed = sample_seed(spec.seed, i);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len_dist(spec.min_length, spec.max_length);
  std::uniform_int_distribution<std::size_t> char_dist(0, chars.size() - 1);
  std::u32string text(len_dist(rng), U' ');
  for (char32_t& c : text) c = chars[char_dist(rng)];
  const std::string text8 = utf8::encode(text);
  for (std::size_t attempt = 0; attempt < spec.max_attempts; ++attempt) {
    const AffineParams a = sample_affine(rng, spec.ranges, spec.render);
    try {
      return render_sample(text8, a, spec.render, seed);
    } catch (const CanvasOverflow&) {
    }
  }
  return render_sample(text8, AffineParams{}, spec.render, seed);
}

/// Writes img_NNNNNN.pgm files and index.tsv ("image<TAB>polygon<TAB>text").
inline std::vector<SpottingRecord> generate_dataset(const std::filesystem::path& dir, const DatasetSpec& spec) {
  if (spec.count == 0) fail(ErrorKind::config, "synth: sample count must be at least 1");
  if (spec.min_length == 0 || spec.min_length > spec.max_length)
    fail(ErrorKind::config, "synth: need 1 <= min_length <= max_length");
  const std::u32string chars = utf8::decode(spec.charset);
  if (chars.empty()) fail(ErrorKind::config, "synth: empty charset");
  for (char32_t c : chars) GlyphFont::standard().pattern(c);
  // The longest string must fit untransformed, otherwise no resampling helps.
  const Polygon widest = text_box_polygon(spec.max_length, AffineParams{}, spec.render);
  for (const Point& p : widest)
    if (p.x < 0 || p.y < 0 || p.x > static_cast<double>(spec.render.canvas_width) ||
        p.y > static_cast<double>(spec.render.canvas_height))
      fail(ErrorKind::config, "synth: " + std::to_string(spec.max_length) + " characters cannot fit a " +
                                  std::to_string(spec.render.canvas_height) + "x" +
                                  std::to_string(spec.render.canvas_width) + " canvas");

  std::filesystem::create_directories(dir);
  std::vector<SpottingRecord> index;
  for (std::size_t i = 0; i < spec.count; ++i) {
    SampleRecord s = make_sample(spec, i);
    char name[32];
    std::snprintf(name, sizeof name, "img_%06zu.pgm", i);
    write_pgm((dir / name).string(), s.image);
    index.push_back({name, s.polygon, s.transcription});
  }
  write_spotting_file((dir / kIndexFileName).string(), index);
  return index;
}

}  // namespace attnocr
