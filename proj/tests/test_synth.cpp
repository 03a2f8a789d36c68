// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"

namespace attnocr {
namespace {

bool inside(const Polygon& poly, Point p, double tol) {
  // Convex, clockwise-or-counter-clockwise: all edge cross products share a sign.
  int pos = 0, neg = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const double cr = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / len;
    if (cr > tol) ++pos;
    if (cr < -tol) ++neg;
  }
  return pos == 0 || neg == 0;
}

TEST(Affine, QuarterTurnMapsXToY) {
  AffineParams a;
  a.rotation = std::numbers::pi / 2;
  const Point q = apply_affine({1, 0}, a);
  EXPECT_NEAR(q.x, 0.0, 1e-15);
  EXPECT_NEAR(q.y, 1.0, 1e-15);
}

TEST(Affine, OrderIsScaleShearRotateTranslate) {
  const AffineParams a{0.3, 2.0, -1.0, 0.25, 1.2};
  const Point p{3, -2};
  // Written out step by step.
  const double sx = 1.2 * 3, sy = 1.2 * -2;
  const double hx = sx + 0.25 * sy;
  const Point want{std::cos(0.3) * hx - std::sin(0.3) * sy + 2.0, std::sin(0.3) * hx + std::cos(0.3) * sy - 1.0};
  const Point got = apply_affine(p, a);
  EXPECT_NEAR(got.x, want.x, 1e-12);
  EXPECT_NEAR(got.y, want.y, 1e-12);
  const auto m = affine_matrix(a);
  EXPECT_NEAR(m[0] * p.x + m[1] * p.y + a.dx, want.x, 1e-12);
  EXPECT_NEAR(m[2] * p.x + m[3] * p.y + a.dy, want.y, 1e-12);
}

TEST(Affine, InverseRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 200; ++k) {
    const AffineParams a{u(rng), 5 * u(rng), 5 * u(rng), 0.3 * u(rng), 1.0 + 0.5 * u(rng)};
    const Point p{10 * u(rng), 10 * u(rng)};
    const Point back = invert_affine(apply_affine(p, a), a);
    EXPECT_NEAR(back.x, p.x, 1e-12);
    EXPECT_NEAR(back.y, p.y, 1e-12);
  }
}

TEST(Render, IdentityGlyphMatchesFontPattern) {
  RenderOptions o;
  o.base_scale = 1.0;
  o.supersample = 1;
  o.jitter = 0.0;
  const SampleRecord r = render_sample("A", AffineParams{}, o, 9);
  // 5x7 glyph centred on a 32x96 canvas lands at (12, 45).
  const GlyphFont& f = GlyphFont::standard();
  for (std::size_t y = 0; y < o.canvas_height; ++y)
    for (std::size_t x = 0; x < o.canvas_width; ++x) {
      const bool in_glyph = y >= 12 && y < 19 && x >= 45 && x < 50;
      const double want = in_glyph && f.lit(U'A', y - 12, x - 45) ? 0.8 : 0.0;
      EXPECT_EQ(r.image.at(y, x), want) << y << "," << x;
    }
}

TEST(Render, PolygonIsTheTransformedTextBox) {
  const RenderOptions o;
  const AffineParams a{0.2, 3.0, -1.0, 0.1, 1.1};
  const SampleRecord r = render_sample("HI7", a, o, 1);
  const auto L = detail::layout_text(3, o);
  const double hw = L.text_w * o.base_scale / 2, hh = L.text_h * o.base_scale / 2;
  const Point corners[4] = {{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}};
  ASSERT_EQ(r.polygon.size(), 4u);
  for (int i = 0; i < 4; ++i) {
    const Point q = apply_affine(corners[i], a);
    EXPECT_NEAR(r.polygon[i].x, q.x + L.center.x, 1e-12);
    EXPECT_NEAR(r.polygon[i].y, q.y + L.center.y, 1e-12);
  }
}

TEST(Render, LitPixelsLieInsidePolygon) {
  DatasetSpec spec;
  spec.seed = 77;
  for (std::size_t i = 0; i < 20; ++i) {
    const SampleRecord r = make_sample(spec, i);
    double total = 0;
    for (std::size_t y = 0; y < r.image.height; ++y)
      for (std::size_t x = 0; x < r.image.width; ++x) {
        const double v = r.image.at(y, x);
        total += v;
        // A pixel is lit only if some supersample point is inside, so the
        // pixel centre is at most ~0.71 px from the polygon.
        if (v > 0) EXPECT_TRUE(inside(r.polygon, {x + 0.5, y + 0.5}, 0.75)) << "sample " << i;
      }
    EXPECT_GT(total, 0.0);
  }
}

TEST(Render, ForegroundStaysInJitterBand) {
  DatasetSpec spec;
  spec.seed = 5;
  for (std::size_t i = 0; i < 20; ++i) {
    const SampleRecord r = make_sample(spec, i);
    const double mx = *std::max_element(r.image.pixels.begin(), r.image.pixels.end());
    EXPECT_LE(mx, 1.0);
    EXPECT_GE(mx, 0.3);  // at least one mostly covered pixel at fg >= 0.6
  }
}

TEST(Render, OverflowAndBadInput) {
  RenderOptions o;
  AffineParams big;
  big.scale = 10.0;
  EXPECT_THROW(render_sample("ABCDEFGH", big, o, 0), CanvasOverflow);
  EXPECT_THROW(render_sample("", AffineParams{}, o, 0), Error);
  EXPECT_THROW(render_sample("a", AffineParams{}, o, 0), Error);  // not in the font
  DatasetSpec spec;
  spec.max_length = 40;
  EXPECT_THROW(generate_dataset(testing::scratch_dir("overflow"), spec), Error);
}

TEST(Synth, SampleSeedsAreDistinctAndStable) {
  EXPECT_EQ(sample_seed(7, 3), splitmix64(7 ^ splitmix64(3)));
  EXPECT_NE(sample_seed(7, 3), sample_seed(7, 4));
  EXPECT_NE(sample_seed(7, 3), sample_seed(8, 3));
  DatasetSpec spec;
  spec.seed = 7;
  const SampleRecord a = make_sample(spec, 3), b = make_sample(spec, 3);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.transcription, b.transcription);
  EXPECT_GE(a.transcription.size(), spec.min_length);
  EXPECT_LE(a.transcription.size(), spec.max_length);
}

TEST(Synth, DatasetIsReproducibleAndIndexParses) {
  DatasetSpec spec;
  spec.count = 10;
  spec.seed = 1234;
  const auto d1 = testing::scratch_dir("synth_a"), d2 = testing::scratch_dir("synth_b");
  const auto idx = generate_dataset(d1, spec);
  generate_dataset(d2, spec);
  ASSERT_EQ(idx.size(), 10u);
  for (const auto& entry : std::filesystem::directory_iterator(d1)) {
    const auto name = entry.path().filename();
    EXPECT_EQ(testing::read_file(entry.path()), testing::read_file(d2 / name)) << name;
  }
  const auto parsed = read_spotting_file((d1 / kIndexFileName).string());
  ASSERT_EQ(parsed.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    EXPECT_EQ(parsed[i].image, idx[i].image);
    EXPECT_EQ(parsed[i].text, idx[i].text);
    ASSERT_EQ(parsed[i].polygon.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(parsed[i].polygon[k].x, idx[i].polygon[k].x, 1e-9);
      EXPECT_NEAR(parsed[i].polygon[k].y, idx[i].polygon[k].y, 1e-9);
    }
    const GrayImage img = read_pgm((d1 / parsed[i].image).string());
    EXPECT_EQ(img.height, 32u);
    EXPECT_EQ(img.width, 96u);
  }
}

}  // namespace
}  // namespace attnocr
