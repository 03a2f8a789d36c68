// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "support.hpp"

namespace attnocr {
namespace {

using testing::random_tensor;

GrayImage random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrayImage img(h, w);
  for (double& p : img.pixels) p = u(rng);
  return img;
}

Model tiny_model(std::uint64_t seed = 1) {
  const Config c = testing::tiny_config();
  return Model(c.load_vocab(), c.encoder, c.decoder_config(37), seed);
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

TEST(Encoder, DeskFeatureMapShape) {
  const EncoderConfig cfg;
  std::mt19937_64 rng(1);
  EncoderParams p(cfg, rng);
  Tape tape;
  Var V = encode_image(tape, GrayImage(32, 96), p, cfg);
  EXPECT_EQ(V.shape(), (Shape{4, 12, 64}));
  EXPECT_EQ(cfg.feature_dims(), std::make_pair(std::size_t{4}, std::size_t{12}));
}

TEST(Encoder, ZeroImageWithZeroBiasesGivesZeroFeatures) {
  const EncoderConfig cfg;
  std::mt19937_64 rng(2);
  EncoderParams p(cfg, rng);
  Tape tape;
  Var V = encode_image(tape, GrayImage(32, 96), p, cfg);
  for (double v : V.value().values) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, DeterministicForSeedAndImage) {
  const EncoderConfig cfg;
  const GrayImage img = random_image(32, 96, 5);
  auto run = [&] {
    std::mt19937_64 rng(9);
    EncoderParams p(cfg, rng);
    Tape tape;
    return encode_image(tape, img, p, cfg).value().values;
  };
  EXPECT_EQ(run(), run());
}

TEST(Encoder, WrongInputSizeIsShapeError) {
  const EncoderConfig cfg;
  std::mt19937_64 rng(1);
  EncoderParams p(cfg, rng);
  Tape tape;
  EXPECT_THROW(encode_image(tape, GrayImage(31, 96), p, cfg), Error);
}

TEST(Encoder, InitialStateUsesChannelMeans) {
  std::mt19937_64 rng(3);
  const Tensor v = random_tensor({3, 4, 5}, rng);
  StateInitParams p(5, 6, rng);
  for (double& b : p.bias.values) b = 0.1;
  Tape tape;
  const InitialState s = init_decoder_state(tape.constant(v), p);
  std::vector<double> mean(5, 0.0);
  for (std::size_t cell = 0; cell < 12; ++cell)
    for (std::size_t c = 0; c < 5; ++c) mean[c] += v.values[cell * 5 + c] / 12.0;
  for (std::size_t j = 0; j < 6; ++j) {
    double z = p.bias.values[j];
    for (std::size_t c = 0; c < 5; ++c) z += mean[c] * p.weight.values[c * 6 + j];
    EXPECT_NEAR(s.h.value().values[j], std::tanh(z), 1e-12);
    EXPECT_EQ(s.cell.value().values[j], 0.0);
  }
}

// ---------------------------------------------------------------------------
// Attention and decoder step
// ---------------------------------------------------------------------------

DecoderConfig small_decoder() {
  DecoderConfig d;
  d.vocab_size = 6;
  d.embed_dim = 3;
  d.hidden_dim = 4;
  d.attention_dim = 5;
  d.feature_depth = 3;
  d.max_length = 4;
  return d;
}

TEST(Attention, ScoresLn3And0GiveThreeQuartersOneQuarter) {
  // W_h = 0 and one attention unit, so cell ij scores w * tanh(V_ij W_v).
  // V = (atanh(1/2), 0), W_v = 1, w = 2 ln 3 gives scores (ln 3, 0).
  DecoderConfig d = small_decoder();
  d.attention_dim = 1;
  d.feature_depth = 1;
  std::mt19937_64 rng(1);
  DecoderParams p(d, rng);
  std::fill(p.att_hidden.values.begin(), p.att_hidden.values.end(), 0.0);
  p.att_feature.values = {1.0};
  const double a = 0.5;
  p.att_score.values = {std::log(3.0) / a};
  Tape tape;
  Var V = tape.constant(Tensor({1, 2, 1}, std::vector<double>{std::atanh(a), 0.0}));
  Var h = tape.constant(Tensor({1, 4}, 0.3));
  const Tensor alpha = attention_weights(V, h, p).value();
  EXPECT_NEAR(alpha.values[0], 0.75, 1e-12);
  EXPECT_NEAR(alpha.values[1], 0.25, 1e-12);
}

TEST(Attention, ConstantFeatureMapGivesUniformWeights) {
  std::mt19937_64 rng(2);
  DecoderParams p(small_decoder(), rng);
  Tape tape;
  Var V = tape.constant(Tensor({3, 4, 3}, 0.7));
  const Tensor alpha = attention_weights(V, tape.constant(random_tensor({1, 4}, rng)), p).value();
  EXPECT_EQ(alpha.shape, (Shape{3, 4}));
  for (double a : alpha.values) EXPECT_NEAR(a, 1.0 / 12.0, 1e-15);
}

TEST(Attention, SingleCellTakesAllWeight) {
  std::mt19937_64 rng(3);
  DecoderParams p(small_decoder(), rng);
  Tape tape;
  const Tensor v = random_tensor({1, 1, 3}, rng);
  Var V = tape.constant(v);
  Var alpha = attention_weights(V, tape.constant(random_tensor({1, 4}, rng)), p);
  EXPECT_EQ(alpha.value().values, std::vector<double>{1.0});
  EXPECT_EQ(attention_context(V, alpha).value().values, v.values);
}

TEST(Attention, ContextMatchesLoopOracle) {
  std::mt19937_64 rng(4);
  const Tensor v = random_tensor({3, 5, 4}, rng);
  Tensor alpha = random_tensor({3, 5}, rng, 0.0, 1.0);
  Tape tape;
  const Tensor c = attention_context(tape.constant(v), tape.constant(alpha)).value();
  for (std::size_t k = 0; k < 4; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 5; ++j) s += alpha.values[i * 5 + j] * v.values[(i * 5 + j) * 4 + k];
    EXPECT_NEAR(c.values[k], s, 1e-12);
  }
}

TEST(Lstm, ZeroWeightsHalveTheCell) {
  std::mt19937_64 rng(5);
  DecoderParams p(small_decoder(), rng);
  std::fill(p.lstm_weight.values.begin(), p.lstm_weight.values.end(), 0.0);
  std::fill(p.lstm_bias.values.begin(), p.lstm_bias.values.end(), 0.0);
  Tape tape;
  const Tensor c0({1, 4}, std::vector<double>{1.0, -2.0, 0.5, 3.0});
  DecoderState s{tape.constant(random_tensor({1, 4}, rng)), tape.constant(c0), 0};
  const DecoderState n =
      lstm_step(s, tape.constant(random_tensor({1, 3}, rng)), tape.constant(random_tensor({1, 3}, rng)), p);
  EXPECT_EQ(n.t, 1u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(n.cell.value().values[k], 0.5 * c0.values[k], 1e-15);
    EXPECT_NEAR(n.h.value().values[k], 0.5 * std::tanh(0.5 * c0.values[k]), 1e-15);
  }
}

TEST(Lstm, GradientOfOneStep) {
  std::mt19937_64 rng(6);
  DecoderParams p(small_decoder(), rng);
  const testing::GradCheckReport r = testing::gradcheck(
      {random_tensor({1, 4}, rng), random_tensor({1, 4}, rng), random_tensor({1, 3}, rng), random_tensor({1, 3}, rng)},
      [&](Tape&, const std::vector<Var>& v) {
        const DecoderState n = lstm_step({v[0], v[1], 0}, v[2], v[3], p);
        return testing::weighted_sum(concat({n.h, n.cell}), rng);
      },
      rng);
  EXPECT_LT(r.max_rel, 1e-4) << r.worst;
}

TEST(Attention, GradientThroughWeightsAndContext) {
  std::mt19937_64 rng(7);
  DecoderParams p(small_decoder(), rng);
  const testing::GradCheckReport r = testing::gradcheck(
      {random_tensor({2, 3, 3}, rng), random_tensor({1, 4}, rng)},
      [&](Tape&, const std::vector<Var>& v) {
        Var alpha = attention_weights(v[0], v[1], p);
        return testing::weighted_sum(concat({alpha, attention_context(v[0], alpha)}), rng);
      },
      rng);
  EXPECT_LT(r.max_rel, 1e-4) << r.worst;
}

TEST(Output, LogitsMatchThreeTermOracle) {
  std::mt19937_64 rng(8);
  const DecoderConfig d = small_decoder();
  DecoderParams p(d, rng);
  for (double& b : p.out_bias.values) b = 0.25;
  const Tensor h = random_tensor({1, 4}, rng), c = random_tensor({1, 3}, rng), e = random_tensor({1, 3}, rng);
  Tape tape;
  const Tensor q = output_logits(tape.constant(h), tape.constant(c), tape.constant(e), p).value();
  for (std::size_t k = 0; k < d.vocab_size; ++k) {
    double s = p.out_bias.values[k];
    for (std::size_t i = 0; i < 4; ++i) s += h.values[i] * p.out_hidden.values[i * 6 + k];
    for (std::size_t i = 0; i < 3; ++i) s += c.values[i] * p.out_context.values[i * 6 + k];
    for (std::size_t i = 0; i < 3; ++i) s += e.values[i] * p.out_embed.values[i * 6 + k];
    EXPECT_NEAR(q.values[k], s, 1e-12);
  }
}

TEST(Decoder, ArgmaxPrefersLowestIndexOnTies) {
  const std::vector<double> v{0.5, 2.0, -1.0, 2.0};
  EXPECT_EQ(argmax(v), 1u);
}

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

TEST(Model, TeacherForcedLogitsAreCausal) {
  Model m = tiny_model(3);
  const GrayImage img = random_image(12, 20, 4);
  const Vocabulary& v = m.vocab();
  const TokenSequence a = encode_transcript(std::string_view("ABC"), 5, v);
  for (std::size_t t = 0; t < 5; ++t) {
    TokenSequence b = a;
    for (std::size_t k = t; k < 5; ++k) b.ids[k] = (b.ids[k] + 7) % v.size();
    Tape ta, tb;
    const Tensor la = m.teacher_forced(ta, img, a).logits.value();
    const Tensor lb = m.teacher_forced(tb, img, b).logits.value();
    // Rows 0..t only see ids before t.
    for (std::size_t r = 0; r <= t; ++r)
      for (std::size_t k = 0; k < v.size(); ++k)
        EXPECT_EQ(la.values[r * v.size() + k], lb.values[r * v.size() + k]) << "t=" << t << " row " << r;
  }
}

TEST(Model, GreedyEqualsTeacherForcingOnItsOwnOutput) {
  Model m = tiny_model(4);
  const GrayImage img = random_image(12, 20, 6);
  const GreedyOutput g = m.decode(img);
  ASSERT_EQ(g.ids.size(), 5u);
  TokenSequence fed;
  fed.ids = g.ids;
  fed.mask.assign(5, 1.0);
  Tape tape;
  const TeacherForcedOutput tf = m.teacher_forced(tape, img, fed);
  const Tensor& logits = tf.logits.value();
  const std::size_t K = m.vocab().size();
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t k = 0; k < K; ++k) EXPECT_EQ(logits.values[t * K + k], g.logits[t].values[k]);
    EXPECT_EQ(tf.attention.alphas[t].values, g.attention.alphas[t].values);
  }
}

TEST(Model, AttentionMapsAreDistributions) {
  Model m = tiny_model(5);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const GreedyOutput g = m.decode(random_image(12, 20, s));
    ASSERT_EQ(g.attention.alphas.size(), 5u);
    for (const Tensor& a : g.attention.alphas) {
      double total = 0;
      for (double x : a.values) {
        EXPECT_GE(x, 0.0);
        total += x;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Model, FullLossGradient) {
  Model m = tiny_model(6);
  const GrayImage img = random_image(12, 20, 8);
  const TokenSequence target = encode_transcript(std::string_view("Q7"), 5, m.vocab());
  std::mt19937_64 rng(9);
  const testing::GradCheckReport r = testing::gradcheck_model(m, img, target, rng, 5);
  EXPECT_LT(r.max_rel, 1e-3) << r.worst;
  EXPECT_GE(r.coords, 5u * m.named_parameters().size() - 10);
}

TEST(Model, ParameterNamesAreUnique) {
  Model m = tiny_model();
  std::set<std::string> names;
  for (auto& [n, t] : m.named_parameters()) EXPECT_TRUE(names.insert(n).second) << n;
  EXPECT_TRUE(names.count("decoder.embedding"));
  EXPECT_TRUE(names.count("encoder.asym.row_kernel"));
}

TEST(Model, OverfitsOneSample) {
  // One rendered sample, desk defaults: MCE falls below 0.01 within 500
  // steps and greedy decoding then reproduces the transcript.
  Config cfg;
  cfg.batch_size = 1;
  Checkpoint ck = initial_checkpoint(cfg);
  DatasetSpec spec;
  spec.seed = 17;
  const SampleRecord s = make_sample(spec, 0);
  LabeledImage li{{"", s.polygon, s.transcription}, s.image,
                  encode_transcript(std::string_view(s.transcription), cfg.max_length, ck.model.vocab())};
  ck.config.max_steps = 500;
  const TrainingResult r = train(ck, {li}, nullptr);
  ASSERT_EQ(r.steps, 500u);
  EXPECT_LT(r.mce.back(), 0.01);
  EXPECT_EQ(ck.model.read_text(s.image), s.transcription);
  // Minimum over successive 50-step windows never increases.
  double prev = INFINITY;
  for (std::size_t w = 0; w + 50 <= r.mce.size(); w += 50) {
    const double lo = *std::min_element(r.mce.begin() + static_cast<long>(w), r.mce.begin() + static_cast<long>(w + 50));
    EXPECT_LE(lo, prev) << "window " << w / 50;
    prev = lo;
  }
}

}  // namespace
}  // namespace attnocr
