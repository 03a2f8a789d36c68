// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "attnocr/decoder.hpp"
#include "attnocr/encoder.hpp"
#include "attnocr/geometry.hpp"
#include "attnocr/vocab.hpp"

namespace attnocr {

/// Training / model configuration.
///
/// Text form is one `key = value` per line, `#` starts a comment. Values
/// given later override earlier ones, so the CLI applies, in order: built-in
/// defaults, `preset`, the config file, then `--set key=value` flags.
struct Config {
  std::string vocab_path;  // empty: built-in A-Z0-9
  std::size_t max_length = 12;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t attention_dim = 64;
  EncoderConfig encoder;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  std::vector<std::size_t> lr_decay_steps;  // multiply lr by lr_decay_factor at each
  double lr_decay_factor = 0.1;
  std::size_t batch_size = 4;
  std::size_t max_steps = 20000;
  std::uint64_t seed = 1;
  std::string train_data;
  std::string eval_data;
  std::string checkpoint = "model.ckpt";
  std::string log = "train.jsonl";
  // Early stop once greedy sequence accuracy on the training set reaches this
  // value (0 disables), checked every check_every steps.
  double stop_accuracy = 0.0;
  std::size_t check_every = 500;

  DecoderConfig decoder_config(std::size_t vocab_size) const {
    DecoderConfig d;
    d.vocab_size = vocab_size;
    d.embed_dim = embed_dim;
    d.hidden_dim = hidden_dim;
    d.attention_dim = attention_dim;
    d.feature_depth = encoder.depth();
    d.max_length = max_length;
    return d;
  }

  Vocabulary load_vocab() const {
    return vocab_path.empty() ? build_vocabulary(kDefaultCharset) : load_vocabulary(vocab_path);
  }

  /// learning rate after the step-decay schedule, for 1-based step s.
  double lr_at(std::size_t s) const {
    double lr = learning_rate;
    for (std::size_t b : lr_decay_steps)
      if (s > b) lr *= lr_decay_factor;
    return lr;
  }

  void validate() const {
    auto positive = [](bool ok, const char* key) {
      if (!ok) fail(ErrorKind::config, std::string(key) + " must be positive");
    };
    if (max_length < 2) fail(ErrorKind::config, "T (max_length) must be at least 2");
    positive(embed_dim > 0, "embed_dim");
    positive(hidden_dim > 0, "hidden_dim");
    positive(attention_dim > 0, "attention_dim");
    positive(encoder.input_height > 0 && encoder.input_width > 0, "input size");
    positive(encoder.stem_channels > 0 && encoder.asym_channels > 0, "encoder channels");
    for (std::size_t c : encoder.down_channels) positive(c > 0, "encoder_down");
    positive(learning_rate > 0, "learning_rate");
    if (!(weight_decay >= 0)) fail(ErrorKind::config, "weight_decay must be non-negative");
    positive(lr_decay_factor > 0, "lr_decay_factor");
    positive(batch_size > 0, "batch_size");
    positive(check_every > 0, "check_every");
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long n = std::stoll(v, &pos);
    if (pos != v.size() || n < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::logic_error&) {
    fail(ErrorKind::config, key + ": expected a non-negative integer, got '" + v + "'");
  }
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    return parse_real(v);
  } catch (const Error&) {
    fail(ErrorKind::config, key + ": expected a number, got '" + v + "'");
  }
}

inline std::vector<std::size_t> parse_count_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = v.find(',', start);
    out.push_back(parse_count(key, trim(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start))));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace detail

/// Full-scale hyperparameters (299x299 input, T = 27, LSTM 512, embedding
/// 256, Adam 1e-4 with decay x0.1 at 320k / 400k of 460k steps, batch 24).
inline void apply_full_preset(Config& c) {
  c.max_length = 27;
  c.embed_dim = 256;
  c.hidden_dim = 512;
  c.attention_dim = 512;
  c.encoder.input_height = 299;
  c.encoder.input_width = 299;
  c.learning_rate = 1e-4;
  c.weight_decay = 1e-5;
  c.batch_size = 24;
  c.max_steps = 460000;
  c.lr_decay_steps = {320000, 400000};
  c.lr_decay_factor = 0.1;
}

inline void set_config_value(Config& c, const std::string& key_in, const std::string& value_in) {
  using namespace detail;
  const std::string key = trim(key_in), v = trim(value_in);
  if (key == "preset") {
    if (v == "full")
      apply_full_preset(c);
    else if (v != "desk")
      fail(ErrorKind::config, "unknown preset '" + v + "' (desk | full)");
  } else if (key == "vocab") {
    c.vocab_path = v;
  } else if (key == "T" || key == "max_length") {
    c.max_length = parse_count(key, v);
  } else if (key == "embed_dim") {
    c.embed_dim = parse_count(key, v);
  } else if (key == "hidden_dim") {
    c.hidden_dim = parse_count(key, v);
  } else if (key == "attention_dim") {
    c.attention_dim = parse_count(key, v);
  } else if (key == "input_height") {
    c.encoder.input_height = parse_count(key, v);
  } else if (key == "input_width") {
    c.encoder.input_width = parse_count(key, v);
  } else if (key == "encoder_stem") {
    c.encoder.stem_channels = parse_count(key, v);
  } else if (key == "encoder_asym") {
    c.encoder.asym_channels = parse_count(key, v);
  } else if (key == "encoder_down") {
    c.encoder.down_channels = parse_count_list(key, v);
  } else if (key == "learning_rate") {
    c.learning_rate = parse_double(key, v);
  } else if (key == "weight_decay") {
    c.weight_decay = parse_double(key, v);
  } else if (key == "lr_decay_steps") {
    c.lr_decay_steps = parse_count_list(key, v);
  } else if (key == "lr_decay_factor") {
    c.lr_decay_factor = parse_double(key, v);
  } else if (key == "batch_size") {
    c.batch_size = parse_count(key, v);
  } else if (key == "max_steps") {
    c.max_steps = parse_count(key, v);
  } else if (key == "seed") {
    c.seed = parse_count(key, v);
  } else if (key == "train_data") {
    c.train_data = v;
  } else if (key == "eval_data") {
    c.eval_data = v;
  } else if (key == "checkpoint") {
    c.checkpoint = v;
  } else if (key == "log") {
    c.log = v;
  } else if (key == "stop_accuracy") {
    c.stop_accuracy = parse_double(key, v);
  } else if (key == "check_every") {
    c.check_every = parse_count(key, v);
  } else {
    fail(ErrorKind::config, "unknown config key '" + key + "'");
  }
}

/// Applies "key=value" text on top of c.
inline void apply_config_text(Config& c, const std::string& text, const std::string& origin = "<config>") {
  std::size_t lineno = 0, start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    std::string line = text.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
    start = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::config, origin + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set_config_value(c, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      fail(ErrorKind::config, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_config_file(Config& c, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  apply_config_text(c, text, path);
}

/// Canonical key/value listing; apply_config_text(to_text(c)) reproduces c.
inline std::map<std::string, std::string> config_entries(const Config& c) {
  return {
      {"vocab", c.vocab_path},
      {"T", std::to_string(c.max_length)},
      {"embed_dim", std::to_string(c.embed_dim)},
      {"hidden_dim", std::to_string(c.hidden_dim)},
      {"attention_dim", std::to_string(c.attention_dim)},
      {"input_height", std::to_string(c.encoder.input_height)},
      {"input_width", std::to_string(c.encoder.input_width)},
      {"encoder_stem", std::to_string(c.encoder.stem_channels)},
      {"encoder_asym", std::to_string(c.encoder.asym_channels)},
      {"encoder_down", detail::join(c.encoder.down_channels)},
      {"learning_rate", format_real(c.learning_rate)},
      {"weight_decay", format_real(c.weight_decay)},
      {"lr_decay_steps", detail::join(c.lr_decay_steps)},
      {"lr_decay_factor", format_real(c.lr_decay_factor)},
      {"batch_size", std::to_string(c.batch_size)},
      {"max_steps", std::to_string(c.max_steps)},
      {"seed", std::to_string(c.seed)},
      {"train_data", c.train_data},
      {"eval_data", c.eval_data},
      {"checkpoint", c.checkpoint},
      {"log", c.log},
      {"stop_accuracy", format_real(c.stop_accuracy)},
      {"check_every", std::to_string(c.check_every)},
  };
}

inline std::string config_to_text(const Config& c) {
  std::string s;
  for (const auto& [k, v] : config_entries(c)) s += k + " = " + v + "\n";
  return s;
}

}  // namespace attnocr
