// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "attnocr/decoder.hpp"
#include "attnocr/encoder.hpp"
#include "attnocr/losses.hpp"
#include "attnocr/vocab.hpp"

namespace attnocr {

/// Encoder, state initializer and attention decoder with their vocabulary.
class Model {
 public:
  Model() = default;

  Model(Vocabulary vocab, EncoderConfig enc, DecoderConfig dec, std::uint64_t seed)
      : vocab_(std::move(vocab)), enc_cfg_(std::move(enc)), dec_cfg_(dec) {
    dec_cfg_.vocab_size = vocab_.size();
    dec_cfg_.feature_depth = enc_cfg_.depth();
    std::mt19937_64 rng(seed);
    encoder_ = EncoderParams(enc_cfg_, rng);
    init_ = StateInitParams(enc_cfg_.depth(), dec_cfg_.hidden_dim, rng);
    decoder_ = DecoderParams(dec_cfg_, rng);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const Vocabulary& vocab() const { return vocab_; }
  const EncoderConfig& encoder_config() const { return enc_cfg_; }
  const DecoderConfig& decoder_config() const { return dec_cfg_; }
  std::size_t max_length() const { return dec_cfg_.max_length; }

  EncoderParams& encoder() { return encoder_; }
  StateInitParams& state_init() { return init_; }
  DecoderParams& decoder() { return decoder_; }

  /// Every parameter with a stable dotted name, in a fixed order.
  std::vector<std::pair<std::string, Tensor*>> named_parameters() {
    std::vector<std::pair<std::string, Tensor*>> out;
    auto collect = [&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); };
    encoder_.visit("encoder.", collect);
    init_.visit("init.", collect);
    decoder_.visit("decoder.", collect);
    return out;
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }

  void zero_grad() {
    for (Tensor* t : parameters()) t->zero_grad();
  }

  /// Feature map and initial state for one image.
  std::pair<Var, InitialState> encode(Tape& tape, const GrayImage& img) {
    Var V = encode_image(tape, img, encoder_, enc_cfg_);
    return {V, init_decoder_state(V, init_)};
  }

  TeacherForcedOutput teacher_forced(Tape& tape, const GrayImage& img, const TokenSequence& target) {
    if (target.length() != dec_cfg_.max_length)
      fail(ErrorKind::shape, "target length " + std::to_string(target.length()) + " but model T=" +
                                 std::to_string(dec_cfg_.max_length));
    auto [V, init] = encode(tape, img);
    return forward_teacher_forced(V, init, target, decoder_, vocab_.eos());
  }

  /// Masked cross entropy of the teacher-forced logits.
  Var loss(Tape& tape, const GrayImage& img, const TokenSequence& target) {
    TeacherForcedOutput out = teacher_forced(tape, img, target);
    return masked_cross_entropy(out.logits, target.ids, target.mask);
  }

  GreedyOutput decode(const GrayImage& img) {
    Tape tape;
    auto [V, init] = encode(tape, img);
    return decode_greedy(V, init, decoder_, dec_cfg_.max_length, vocab_.eos());
  }

  std::string read_text(const GrayImage& img) { return ids_to_utf8(decode(img).ids, vocab_); }

 private:
  Vocabulary vocab_;
  EncoderConfig enc_cfg_;
  DecoderConfig dec_cfg_;
  EncoderParams encoder_;
  StateInitParams init_;
  DecoderParams decoder_;
};

}  // namespace attnocr
