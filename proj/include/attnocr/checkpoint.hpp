// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "attnocr/autodiff/adam.hpp"
#include "attnocr/config.hpp"
#include "attnocr/model.hpp"

namespace attnocr {

/// Model plus everything needed to resume training.
struct Checkpoint {
  Config config;
  Model model;
  OptimizerState optimizer;
  std::uint64_t step = 0;
};

/// Fresh model and optimizer for a config.
inline Checkpoint initial_checkpoint(const Config& cfg) {
  cfg.validate();
  Vocabulary vocab = cfg.load_vocab();
  const DecoderConfig dec = cfg.decoder_config(vocab.size());
  Checkpoint ck{cfg, Model(std::move(vocab), cfg.encoder, dec, cfg.seed), {}, 0};
  AdamHyper h;
  h.learning_rate = cfg.learning_rate;
  h.weight_decay = cfg.weight_decay;
  const auto params = ck.model.parameters();
  ck.optimizer = OptimizerState(h, params);
  return ck;
}

// On-disk layout, all integers little-endian:
//   magic "ATNOCRCK" | u32 version | u32 reserved (0) | u64 FNV-1a of body
//   body: u64 metadata length | metadata JSON (UTF-8) | f64 payload
// Payload order: every parameter in named_parameters() order, then Adam first
// moments, then second moments, in the same order.
inline constexpr std::string_view kCheckpointMagic = "ATNOCRCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64(std::string_view in, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

inline std::uint32_t get_u32(std::string_view in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

inline void put_doubles(std::string& out, const std::vector<double>& v) {
  for (double d : v) put_u64(out, std::bit_cast<std::uint64_t>(d));
}

}  // namespace detail

inline std::string serialize_checkpoint(Checkpoint& ck) {
  using nlohmann::json;
  json meta;
  meta["format_version"] = kCheckpointVersion;
  json cfg = json::object();
  for (const auto& [k, v] : config_entries(ck.config)) cfg[k] = v;
  meta["config"] = cfg;
  meta["vocabulary"] = utf8::encode(ck.model.vocab().chars());
  meta["step"] = ck.step;
  json params = json::array();
  const auto named = ck.model.named_parameters();
  for (const auto& [name, t] : named) params.push_back({{"name", name}, {"shape", t->shape}});
  meta["parameters"] = params;
  const AdamHyper& h = ck.optimizer.hyper;
  meta["optimizer"] = {{"step", ck.optimizer.step},   {"learning_rate", h.learning_rate}, {"beta1", h.beta1},
                       {"beta2", h.beta2},            {"epsilon", h.epsilon},             {"weight_decay", h.weight_decay}};
  const std::string meta_text = meta.dump();

  std::string body;
  detail::put_u64(body, meta_text.size());
  body += meta_text;
  for (const auto& [name, t] : named) detail::put_doubles(body, t->values);
  for (const auto& m : ck.optimizer.first_moment) detail::put_doubles(body, m);
  for (const auto& v : ck.optimizer.second_moment) detail::put_doubles(body, v);

  std::string out(kCheckpointMagic);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, 0);
  detail::put_u64(out, detail::fnv1a(body));
  return out + body;
}

inline void save_checkpoint(Checkpoint& ck, const std::string& path) {
  const std::string bytes = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "short write on checkpoint " + path);
}

/// Rebuilds a checkpoint from bytes. When `expected` is given, the stored
/// architecture must agree with it (vocabulary size, T and layer widths).
inline Checkpoint deserialize_checkpoint(std::string_view bytes, const Config* expected = nullptr) {
  using nlohmann::json;
  constexpr std::size_t header = 8 + 4 + 4 + 8;
  if (bytes.size() < header + 8) fail(ErrorKind::format, "checkpoint truncated (header)");
  if (bytes.substr(0, 8) != kCheckpointMagic) fail(ErrorKind::format, "not a checkpoint (bad magic)");
  const std::uint32_t version = detail::get_u32(bytes, 8);
  if (version != kCheckpointVersion)
    fail(ErrorKind::format, "checkpoint version " + std::to_string(version) + " unsupported (expected " +
                                std::to_string(kCheckpointVersion) + ")");
  const std::string_view body = bytes.substr(header);
  if (detail::fnv1a(body) != detail::get_u64(bytes, 16))
    fail(ErrorKind::format, "checkpoint checksum mismatch (file corrupt or truncated)");

  const std::uint64_t meta_len = detail::get_u64(body, 0);
  if (meta_len > body.size() - 8) fail(ErrorKind::format, "checkpoint truncated (metadata)");
  json meta;
  try {
    meta = json::parse(body.substr(8, meta_len));
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("checkpoint metadata: ") + e.what());
  }

  Checkpoint ck;
  try {
    for (const auto& [k, v] : meta.at("config").items()) set_config_value(ck.config, k, v.get<std::string>());
    ck.config.validate();
    ck.step = meta.at("step").get<std::uint64_t>();
    Vocabulary vocab = build_vocabulary(meta.at("vocabulary").get<std::string>());

    if (expected) {
      const Vocabulary want = expected->load_vocab();
      if (want.size() != vocab.size())
        fail(ErrorKind::shape, "checkpoint vocabulary has " + std::to_string(vocab.size()) +
                                   " entries (EOS included) but the configuration expects " +
                                   std::to_string(want.size()));
      const auto a = ck.config.decoder_config(vocab.size()), b = expected->decoder_config(want.size());
      if (a.max_length != b.max_length || a.embed_dim != b.embed_dim || a.hidden_dim != b.hidden_dim ||
          a.attention_dim != b.attention_dim || a.feature_depth != b.feature_depth)
        fail(ErrorKind::shape, "checkpoint architecture differs from the configuration");
    }

    const DecoderConfig dec = ck.config.decoder_config(vocab.size());
    ck.model = Model(std::move(vocab), ck.config.encoder, dec, 0);
    const auto named = ck.model.named_parameters();
    const json& plist = meta.at("parameters");
    if (plist.size() != named.size())
      fail(ErrorKind::shape, "checkpoint stores " + std::to_string(plist.size()) + " parameters, model has " +
                                 std::to_string(named.size()));
    std::size_t total = 0;
    for (std::size_t i = 0; i < named.size(); ++i) {
      const std::string name = plist[i].at("name").get<std::string>();
      const Shape shape = plist[i].at("shape").get<Shape>();
      if (name != named[i].first)
        fail(ErrorKind::shape, "checkpoint parameter " + std::to_string(i) + " is '" + name + "', expected '" +
                                   named[i].first + "'");
      if (shape != named[i].second->shape)
        fail(ErrorKind::shape, "parameter '" + name + "' stored as " + shape_str(shape) +
                                   " but the configuration implies " + shape_str(named[i].second->shape));
      total += shape_size(shape);
    }

    const std::size_t payload_off = 8 + meta_len;
    if (body.size() - payload_off != 3 * total * 8)
      fail(ErrorKind::format, "checkpoint payload has " + std::to_string(body.size() - payload_off) +
                                  " bytes, expected " + std::to_string(3 * total * 8));
    std::size_t off = payload_off;
    auto read_into = [&](std::vector<double>& dst) {
      for (double& d : dst) {
        d = std::bit_cast<double>(detail::get_u64(body, off));
        off += 8;
      }
    };
    for (auto& [name, t] : named) read_into(t->values);

    const json& o = meta.at("optimizer");
    AdamHyper h;
    h.learning_rate = o.at("learning_rate").get<double>();
    h.beta1 = o.at("beta1").get<double>();
    h.beta2 = o.at("beta2").get<double>();
    h.epsilon = o.at("epsilon").get<double>();
    h.weight_decay = o.at("weight_decay").get<double>();
    const auto params = ck.model.parameters();
    ck.optimizer = OptimizerState(h, params);
    ck.optimizer.step = o.at("step").get<std::uint64_t>();
    for (auto& m : ck.optimizer.first_moment) read_into(m);
    for (auto& v : ck.optimizer.second_moment) read_into(v);
  } catch (const json::exception& e) {
    fail(ErrorKind::format, std::string("checkpoint metadata: ") + e.what());
  }
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path, const Config* expected = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open checkpoint " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, expected);
}

}  // namespace attnocr
