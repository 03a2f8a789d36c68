// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

namespace attnocr {
namespace {

TEST(Anchors, CountAndOrder) {
  const AnchorGrid g = generate_anchors(2, 2, 16.0, {32.0}, kTextAnchorRatios);
  ASSERT_EQ(g.anchors.size(), 28u);
  // First cell centre (8, 8), ratio 1/9: 96 wide, 32/3 tall.
  const Box& a = g.anchors[0];
  EXPECT_NEAR(a.cx(), 8.0, 1e-12);
  EXPECT_NEAR(a.width(), 96.0, 1e-12);
  EXPECT_NEAR(a.height(), 32.0 / 3.0, 1e-12);
  EXPECT_NEAR(g.anchors[7].cx(), 24.0, 1e-12);  // next cell
}

TEST(Anchors, AreaPreservingRatios) {
  const AnchorGrid g = generate_anchors(1, 1, 16.0, {16.0}, {0.25});
  EXPECT_NEAR(g.anchors[0].width(), 32.0, 1e-12);
  EXPECT_NEAR(g.anchors[0].height(), 8.0, 1e-12);
  for (const Box& b : generate_anchors(1, 1, 8.0, {16.0}, kTextAnchorRatios).anchors)
    EXPECT_NEAR(b.area(), 256.0, 1e-9);
}

TEST(Anchors, InvalidArguments) {
  EXPECT_THROW(generate_anchors(0, 2, 16.0, {32.0}, {1.0}), Error);
  EXPECT_THROW(generate_anchors(2, 2, 16.0, {}, {1.0}), Error);
  EXPECT_THROW(generate_anchors(2, 2, 16.0, {32.0}, {-1.0}), Error);
}

TEST(BoxIou, HandValues) {
  EXPECT_NEAR(box_iou({0, 0, 2, 2}, {1, 0, 3, 2}), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(box_iou({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0);
  EXPECT_EQ(box_iou({0, 0, 1, 1}, {2, 2, 3, 3}), 0.0);
  EXPECT_EQ(box_iou({0, 0, 0, 1}, {0, 0, 1, 1}), 0.0);  // degenerate
}

TEST(Match, BestMatchRuleRescuesLowIouGt) {
  // Best anchor for the gt has IoU 0.55 < 0.7 but still becomes positive.
  const std::vector<Box> anchors{{0, 0, 10, 10}, {20, 20, 30, 30}};
  const Box gt{0, 0, 10, 5.5};
  ASSERT_NEAR(box_iou(anchors[0], gt), 0.55, 1e-12);
  const MatchResult m = match_anchors(anchors, {gt});
  EXPECT_EQ(m.labels[0], AnchorLabel::positive);
  EXPECT_EQ(m.matched_gt[0], 0);
  EXPECT_EQ(m.labels[1], AnchorLabel::negative);
}

TEST(Match, IgnoreBandAndNoGts) {
  const std::vector<Box> anchors{{0, 0, 10, 10}, {0, 0, 10, 4}, {50, 50, 60, 60}};
  const MatchResult m = match_anchors(anchors, {{0, 0, 10, 10}});
  EXPECT_EQ(m.labels[0], AnchorLabel::positive);
  EXPECT_EQ(m.labels[1], AnchorLabel::ignore);  // IoU 0.4
  EXPECT_EQ(m.labels[2], AnchorLabel::negative);
  const MatchResult none = match_anchors(anchors, {});
  for (AnchorLabel l : none.labels) EXPECT_EQ(l, AnchorLabel::negative);
}

TEST(Match, EqualsBruteForceOnRandomInstances) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(0.0, 64.0), len(4.0, 48.0);
  for (int trial = 0; trial < 100; ++trial) {
    const AnchorGrid g = generate_anchors(4, 4, 16.0, {16.0, 32.0}, kTextAnchorRatios);
    std::vector<Box> gts(rng() % 4);
    for (Box& b : gts) {
      const double x = pos(rng), y = pos(rng);
      b = {x, y, x + len(rng), y + len(rng)};
    }
    const MatchResult want = testing::brute_force_match(g.anchors, gts, 0.7, 0.3);
    const MatchResult got = match_anchors(g.anchors, gts);
    EXPECT_EQ(got.labels, want.labels) << "trial " << trial;
    EXPECT_EQ(got.matched_gt, want.matched_gt) << "trial " << trial;
  }
}

TEST(BoxDeltas, ClosedFormAndRoundTrip) {
  const Box anchor{0, 0, 10, 10};
  const BoxDeltas d = encode_box_deltas(anchor, {-5, 0, 15, 10});
  EXPECT_NEAR(d[0], 0.0, 1e-15);
  EXPECT_NEAR(d[1], 0.0, 1e-15);
  EXPECT_NEAR(d[2], std::log(2.0), 1e-15);
  EXPECT_NEAR(d[3], 0.0, 1e-15);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-50, 50), len(0.5, 80);
  for (int k = 0; k < 1000; ++k) {
    const double ax = pos(rng), ay = pos(rng), gx = pos(rng), gy = pos(rng);
    const Box a{ax, ay, ax + len(rng), ay + len(rng)}, g{gx, gy, gx + len(rng), gy + len(rng)};
    const Box back = decode_box_deltas(a, encode_box_deltas(a, g));
    EXPECT_NEAR(back.x1, g.x1, 1e-9);
    EXPECT_NEAR(back.y1, g.y1, 1e-9);
    EXPECT_NEAR(back.x2, g.x2, 1e-9);
    EXPECT_NEAR(back.y2, g.y2, 1e-9);
  }
}

TEST(TextRatios, WideBoxGetsMoreConfidentAnchors) {
  const Box gt{12, 24, 44, 32};  // 32 x 8, 4:1, centred on a grid cell
  auto count = [&](const std::vector<double>& ratios) {
    std::size_t n = 0;
    for (const Box& b : generate_anchors(8, 8, 8.0, {16.0, 32.0}, ratios).anchors) n += box_iou(b, gt) >= 0.7;
    return n;
  };
  EXPECT_GT(count(kTextAnchorRatios), count(kDefaultAnchorRatios));
}

TEST(BoxText, FormatParseRoundTrip) {
  const Box b{0.1, -2.5, 3.0, 1e-3};
  EXPECT_EQ(parse_box(format_box(b)), b);
  EXPECT_THROW(parse_box("1,2,3"), Error);
  EXPECT_THROW(parse_real("1.5x"), Error);
}

}  // namespace
}  // namespace attnocr
