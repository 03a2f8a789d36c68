// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "attnocr/autodiff/ops.hpp"
#include "attnocr/utf8.hpp"

namespace attnocr {

inline constexpr std::string_view kDefaultCharset = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// Character <-> index map. EOS has no character; it always takes the last
/// index, one past the printable characters.
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::u32string chars) : chars_(std::move(chars)) {
    if (chars_.empty()) fail(ErrorKind::config, "vocabulary: charset is empty");
    for (std::size_t i = 0; i < chars_.size(); ++i) {
      const char32_t c = chars_[i];
      if (c == U'\n' || c == U'\r' || c == U'\t')
        fail(ErrorKind::config, "vocabulary: control character at position " + std::to_string(i));
      if (!index_.emplace(c, i).second)
        fail(ErrorKind::config, "vocabulary: duplicate character '" + utf8::encode(std::u32string(1, c)) +
                                    "' at position " + std::to_string(i));
    }
  }

  std::size_t size() const { return chars_.size() + 1; }
  std::size_t eos() const { return chars_.size(); }
  const std::u32string& chars() const { return chars_; }

  bool contains(char32_t c) const { return index_.count(c) != 0; }

  std::size_t index_of(char32_t c) const {
    auto it = index_.find(c);
    if (it == index_.end())
      fail(ErrorKind::format, "character '" + utf8::encode(std::u32string(1, c)) + "' (U+" + hex(c) +
                                  ") is not in the vocabulary");
    return it->second;
  }

  char32_t char_at(std::size_t i) const {
    if (i >= chars_.size()) fail(ErrorKind::shape, "no printable character at index " + std::to_string(i));
    return chars_[i];
  }

 private:
  static std::string hex(char32_t c) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04X", static_cast<unsigned>(c));
    return buf;
  }

  std::u32string chars_;
  std::unordered_map<char32_t, std::size_t> index_;
};

/// Input order is kept; EOS is appended at index len(charset).
inline Vocabulary build_vocabulary(std::string_view charset_utf8) {
  return Vocabulary(utf8::decode(charset_utf8));
}

/// One character per line, UTF-8, EOS implicit.
inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open vocabulary file " + path);
  std::u32string chars;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::u32string cps = utf8::decode(line);
    if (cps.size() != 1)
      fail(ErrorKind::format, path + ":" + std::to_string(lineno) + ": expected one character per line");
    chars += cps;
  }
  return Vocabulary(std::move(chars));
}

inline void save_vocabulary(const Vocabulary& v, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write vocabulary file " + path);
  for (char32_t c : v.chars()) out << utf8::encode(std::u32string(1, c)) << '\n';
}

/// Fixed-length ids plus the sequence mask: 1 for every real character and
/// for the first EOS, 0 for the EOS padding after it.
struct TokenSequence {
  std::vector<std::size_t> ids;
  std::vector<double> mask;

  std::size_t length() const { return ids.size(); }
};

inline TokenSequence encode_transcript(std::u32string_view text, std::size_t T, const Vocabulary& vocab) {
  if (T < 2) fail(ErrorKind::config, "sequence length T must be at least 2");
  if (text.size() + 1 > T)
    fail(ErrorKind::format, "transcript of " + std::to_string(text.size()) + " characters does not fit T=" +
                                std::to_string(T) + " (at most T-1 characters plus EOS)");
  TokenSequence seq;
  seq.ids.assign(T, vocab.eos());
  seq.mask.assign(T, 0.0);
  for (std::size_t i = 0; i < text.size(); ++i) {
    seq.ids[i] = vocab.index_of(text[i]);
    seq.mask[i] = 1.0;
  }
  seq.mask[text.size()] = 1.0;
  return seq;
}

inline TokenSequence encode_transcript(std::string_view text_utf8, std::size_t T, const Vocabulary& vocab) {
  return encode_transcript(std::u32string_view(utf8::decode(text_utf8)), T, vocab);
}

/// Characters before the first EOS.
inline std::u32string ids_to_text(const std::vector<std::size_t>& ids, const Vocabulary& vocab) {
  std::u32string out;
  for (std::size_t id : ids) {
    if (id == vocab.eos()) break;
    out.push_back(vocab.char_at(id));
  }
  return out;
}

inline std::string ids_to_utf8(const std::vector<std::size_t>& ids, const Vocabulary& vocab) {
  return utf8::encode(ids_to_text(ids, vocab));
}

/// Trainable embedding table E, one row per vocabulary entry (EOS included).
struct EmbeddingMatrix {
  Tensor table;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t vocab_size, std::size_t embed_dim, std::mt19937_64& rng)
      : table(glorot_uniform({vocab_size, embed_dim}, vocab_size, embed_dim, rng)) {}

  std::size_t rows() const { return table.dim(0); }
  std::size_t dim() const { return table.dim(1); }
};

inline Var lookup_embedding(const std::vector<std::size_t>& ids, Var table) {
  return gather_rows(table, ids);
}

}  // namespace attnocr
