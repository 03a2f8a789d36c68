// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "attnocr/autodiff/ops.hpp"
#include "attnocr/encoder.hpp"
#include "attnocr/vocab.hpp"

namespace attnocr {

struct DecoderConfig {
  std::size_t vocab_size = 37;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t attention_dim = 64;
  std::size_t feature_depth = 64;
  std::size_t max_length = 12;  // T, EOS included
};

/// Trainable weights of the attention decoder. Row-vector convention:
/// every projection is x [1 x in] * W [in x out].
struct DecoderParams {
  // Additive attention: score_ij = tanh(h W_h + V_ij W_v) w_score
  Tensor att_hidden;   // [hidden x att]
  Tensor att_feature;  // [depth x att]
  Tensor att_score;    // [att x 1]
  // LSTM over [h_prev ; c_t ; e_prev], gate blocks ordered i, f, o, g
  Tensor lstm_weight;  // [(hidden + depth + embed) x 4 hidden]
  Tensor lstm_bias;    // [1 x 4 hidden]
  // q_t = h_t W_oh + c_t W_oc + e_prev W_oe + b
  Tensor out_hidden;   // [hidden x vocab]
  Tensor out_context;  // [depth x vocab]
  Tensor out_embed;    // [embed x vocab]
  Tensor out_bias;     // [1 x vocab]
  EmbeddingMatrix embedding;

  DecoderParams() = default;

  DecoderParams(const DecoderConfig& c, std::mt19937_64& rng) {
    const std::size_t H = c.hidden_dim, A = c.attention_dim, D = c.feature_depth, E = c.embed_dim,
                      K = c.vocab_size;
    att_hidden = glorot_uniform({H, A}, H, A, rng);
    att_feature = glorot_uniform({D, A}, D, A, rng);
    att_score = glorot_uniform({A, 1}, A, 1, rng);
    lstm_weight = glorot_uniform({H + D + E, 4 * H}, H + D + E, 4 * H, rng);
    lstm_bias = zeros_param({1, 4 * H});
    out_hidden = glorot_uniform({H, K}, H, K, rng);
    out_context = glorot_uniform({D, K}, D, K, rng);
    out_embed = glorot_uniform({E, K}, E, K, rng);
    out_bias = zeros_param({1, K});
    embedding = EmbeddingMatrix(K, E, rng);
  }

  std::size_t hidden() const { return att_hidden.dim(0); }
  std::size_t vocab() const { return out_bias.dim(1); }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "attention.hidden", att_hidden);
    f(prefix + "attention.feature", att_feature);
    f(prefix + "attention.score", att_score);
    f(prefix + "lstm.weight", lstm_weight);
    f(prefix + "lstm.bias", lstm_bias);
    f(prefix + "output.hidden", out_hidden);
    f(prefix + "output.context", out_context);
    f(prefix + "output.embed", out_embed);
    f(prefix + "output.bias", out_bias);
    f(prefix + "embedding", embedding.table);
  }
};

struct DecoderState {
  Var h;     // [1 x hidden]
  Var cell;  // [1 x hidden]
  std::size_t t = 0;  // steps taken so far
};

/// Per-step attention maps alpha_t [h x w] and contexts c_t [d].
struct AttentionRecord {
  std::vector<Tensor> alphas;
  std::vector<Tensor> contexts;
};

/// Feature-side half of the attention score, V_ij W_v for every cell, as
/// [h*w x att]. Constant across decoding steps, so callers compute it once.
inline Var attention_keys(Var V, DecoderParams& p) {
  const Shape s = V.shape();
  return matmul(reshape(V, {s[0] * s[1], s[2]}), V.tape->param(p.att_feature));
}

/// alpha [h x w]: softmax over all cells of w_score . tanh(h_prev W_h + V_ij W_v).
inline Var attention_weights(Var V, Var keys, Var h_prev, DecoderParams& p) {
  Tape& tape = *V.tape;
  const Shape s = V.shape();
  Var query = matmul(h_prev, tape.param(p.att_hidden));
  Var scores = matmul(tanh(add_bias(keys, query)), tape.param(p.att_score));
  return reshape(softmax(scores), {s[0], s[1]});
}

inline Var attention_weights(Var V, Var h_prev, DecoderParams& p) {
  return attention_weights(V, attention_keys(V, p), h_prev, p);
}

/// c_t [1 x d] = sum_ij alpha_ij V_ij.
inline Var attention_context(Var V, Var alpha) {
  const Shape s = V.shape();
  if (alpha.shape() != Shape{s[0], s[1]})
    fail(ErrorKind::shape, "attention_context: alpha " + shape_str(alpha.shape()) + " vs feature map " +
                               shape_str(s));
  return matmul(reshape(alpha, {1, s[0] * s[1]}), reshape(V, {s[0] * s[1], s[2]}));
}

inline DecoderState lstm_step(const DecoderState& state, Var context, Var e_prev, DecoderParams& p) {
  Tape& tape = *state.h.tape;
  const std::size_t H = p.hidden();
  Var x = concat({state.h, context, e_prev});
  if (x.size() != p.lstm_weight.dim(0))
    fail(ErrorKind::shape, "lstm_step: input width " + std::to_string(x.size()) + " but weights expect " +
                               std::to_string(p.lstm_weight.dim(0)));
  Var z = add(matmul(x, tape.param(p.lstm_weight)), tape.param(p.lstm_bias));
  Var in_gate = sigmoid(slice(z, 0, H));
  Var forget_gate = sigmoid(slice(z, H, H));
  Var out_gate = sigmoid(slice(z, 2 * H, H));
  Var candidate = tanh(slice(z, 3 * H, H));
  Var cell = add(mul(forget_gate, state.cell), mul(in_gate, candidate));
  Var h = mul(out_gate, tanh(cell));
  return {h, cell, state.t + 1};
}

/// q_t [1 x vocab].
inline Var output_logits(Var h, Var context, Var e_prev, DecoderParams& p) {
  Tape& tape = *h.tape;
  Var q = add(matmul(h, tape.param(p.out_hidden)), matmul(context, tape.param(p.out_context)));
  q = add(q, matmul(e_prev, tape.param(p.out_embed)));
  return add(q, tape.param(p.out_bias));
}

struct DecodeStep {
  DecoderState state;
  Var alpha;
  Var context;
  Var logits;
};

/// One decoder step: attend with h_{t-1}, advance the LSTM, emit logits.
inline DecodeStep decoder_step(Var V, Var keys, const DecoderState& prev, Var e_prev, DecoderParams& p) {
  Var alpha = attention_weights(V, keys, prev.h, p);
  Var ctx = attention_context(V, alpha);
  DecoderState next = lstm_step(prev, ctx, e_prev, p);
  Var logits = output_logits(next.h, ctx, e_prev, p);
  return {next, alpha, ctx, logits};
}

struct TeacherForcedOutput {
  Var logits;  // [T x vocab]
  AttentionRecord attention;
};

/// Runs exactly T steps. Step 1 is fed the EOS embedding; step t > 1 is fed
/// the embedding of the ground-truth token t - 1.
inline TeacherForcedOutput forward_teacher_forced(Var V, const InitialState& init, const TokenSequence& target,
                                                  DecoderParams& p, std::size_t eos) {
  Tape& tape = *V.tape;
  const std::size_t T = target.length();
  if (T == 0) fail(ErrorKind::shape, "forward_teacher_forced: empty target");
  Var table = tape.param(p.embedding.table);
  std::vector<std::size_t> prev_ids(T);
  prev_ids[0] = eos;
  for (std::size_t t = 1; t < T; ++t) prev_ids[t] = target.ids[t - 1];
  Var prev_emb = lookup_embedding(prev_ids, table);
  const std::size_t E = p.embedding.dim();

  Var keys = attention_keys(V, p);
  DecoderState state{init.h, init.cell, 0};
  TeacherForcedOutput out;
  std::vector<Var> rows;
  for (std::size_t t = 0; t < T; ++t) {
    DecodeStep step = decoder_step(V, keys, state, slice(prev_emb, t * E, E), p);
    state = step.state;
    rows.push_back(step.logits);
    out.attention.alphas.push_back(step.alpha.value());
    out.attention.contexts.push_back(Tensor({step.context.size()}, step.context.value().values));
  }
  out.logits = reshape(concat(rows), {T, p.vocab()});
  return out;
}

/// Lowest index among the maxima.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

struct GreedyOutput {
  std::vector<std::size_t> ids;
  AttentionRecord attention;
  std::vector<Tensor> logits;  // per step, [1 x vocab]
};

/// T greedy steps; each argmax token feeds the next step.
inline GreedyOutput decode_greedy(Var V, const InitialState& init, DecoderParams& p, std::size_t T,
                                  std::size_t eos) {
  Tape& tape = *V.tape;
  Var table = tape.param(p.embedding.table);
  Var keys = attention_keys(V, p);
  DecoderState state{init.h, init.cell, 0};
  std::size_t prev = eos;
  GreedyOutput out;
  for (std::size_t t = 0; t < T; ++t) {
    DecodeStep step = decoder_step(V, keys, state, lookup_embedding({prev}, table), p);
    state = step.state;
    prev = argmax(step.logits.value().values);
    out.ids.push_back(prev);
    out.attention.alphas.push_back(step.alpha.value());
    out.attention.contexts.push_back(Tensor({step.context.size()}, step.context.value().values));
    out.logits.push_back(step.logits.value());
  }
  return out;
}

}  // namespace attnocr
