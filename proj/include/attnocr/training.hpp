// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "attnocr/autodiff/adam.hpp"
#include "attnocr/checkpoint.hpp"
#include "attnocr/image.hpp"
#include "attnocr/metrics.hpp"
#include "attnocr/synth.hpp"

namespace attnocr {

struct LabeledImage {
  SpottingRecord record;  // polygon + transcription
  GrayImage image;
  TokenSequence target;
};

/// Reads `dir/index.tsv` and every image it names; transcripts are encoded
/// against the model vocabulary and length T.
inline std::vector<LabeledImage> load_dataset(const std::filesystem::path& dir, const Vocabulary& vocab,
                                              std::size_t T) {
  const auto index_path = dir / kIndexFileName;
  if (!std::filesystem::exists(index_path)) fail(ErrorKind::io, "dataset index not found: " + index_path.string());
  std::vector<LabeledImage> out;
  for (SpottingRecord& r : read_spotting_file(index_path.string())) {
    if (r.image.empty()) fail(ErrorKind::format, index_path.string() + ": index line without an image field");
    LabeledImage s;
    s.image = read_pgm((dir / r.image).string());
    try {
      s.target = encode_transcript(std::string_view(r.text), T, vocab);
    } catch (const Error& e) {
      fail(e.kind(), r.image + ": " + e.what());
    }
    s.record = std::move(r);
    out.push_back(std::move(s));
  }
  if (out.empty()) fail(ErrorKind::format, "dataset " + dir.string() + " is empty");
  return out;
}

inline nlohmann::json to_json(const LossBreakdown& b) {
  nlohmann::json comps = nlohmann::json::object();
  for (const auto& [k, v] : b.components) comps[k] = v;
  return {{"total", b.total}, {"components", comps}, {"reg_weight", b.reg_weight}};
}

struct TrainingResult {
  std::vector<double> mce;  // per step
  std::size_t steps = 0;
  bool stopped_early = false;
  double final_accuracy = -1.0;  // last early-stop check, -1 if none ran
};

/// Fraction of samples whose greedy decode equals the transcript exactly.
inline double sequence_accuracy(Model& model, const std::vector<LabeledImage>& data) {
  std::size_t ok = 0;
  for (const LabeledImage& s : data)
    if (model.read_text(s.image) == s.record.text) ++ok;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

/// Mini-batch teacher-forced MCE optimization with Adam. The sample order is
/// a per-epoch shuffle driven by config.seed. One JSON object per step goes
/// to `log`: step, learning rate, MCE and the loss breakdown.
inline TrainingResult train(Checkpoint& ck, const std::vector<LabeledImage>& data, std::ostream* log,
                            const std::function<void(std::size_t, double)>& progress = {}) {
  const Config& cfg = ck.config;
  if (data.empty()) fail(ErrorKind::config, "training set is empty");
  Model& model = ck.model;
  const auto params = model.parameters();
  std::mt19937_64 order_rng(splitmix64(cfg.seed));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  TrainingResult res;
  const std::size_t B = std::min(cfg.batch_size, data.size());
  while (ck.step < cfg.max_steps) {
    const std::size_t step = ck.step + 1;
    model.zero_grad();
    Tape tape;
    std::vector<Var> losses;
    for (std::size_t b = 0; b < B; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      const LabeledImage& s = data[order[cursor++]];
      losses.push_back(model.loss(tape, s.image, s.target));
    }
    Var total = losses[0];
    for (std::size_t b = 1; b < losses.size(); ++b) total = add(total, losses[b]);
    Var mean = scale(total, 1.0 / static_cast<double>(losses.size()));
    const double mce = mean.item();
    if (!std::isfinite(mce)) fail(ErrorKind::numeric, "non-finite loss at step " + std::to_string(step));
    tape.backward(mean);

    ck.optimizer.hyper.learning_rate = cfg.lr_at(step);
    adam_step(params, ck.optimizer);
    ck.step = step;
    res.mce.push_back(mce);
    res.steps += 1;

    if (log) {
      nlohmann::json line = {{"step", step},
                             {"lr", ck.optimizer.hyper.learning_rate},
                             {"mce", mce},
                             {"loss", to_json(recognition_loss(mce, params, cfg.weight_decay))}};
      *log << line.dump() << '\n';
    }
    if (progress) progress(step, mce);

    if (cfg.stop_accuracy > 0.0 && step % cfg.check_every == 0) {
      res.final_accuracy = sequence_accuracy(model, data);
      if (res.final_accuracy >= cfg.stop_accuracy) {
        res.stopped_early = true;
        break;
      }
    }
  }
  return res;
}

/// Trains from a fresh initialization described by `cfg` and writes the
/// checkpoint and JSON-lines log named there.
inline TrainingResult run_training(const Config& cfg, Checkpoint* out = nullptr,
                                   const std::function<void(std::size_t, double)>& progress = {}) {
  Checkpoint ck = initial_checkpoint(cfg);
  if (cfg.train_data.empty()) fail(ErrorKind::config, "train_data is not set");
  const auto data = load_dataset(cfg.train_data, ck.model.vocab(), cfg.max_length);
  std::ofstream log;
  if (!cfg.log.empty()) {
    log.open(cfg.log, std::ios::binary);
    if (!log) fail(ErrorKind::io, "cannot write training log " + cfg.log);
  }
  TrainingResult res = train(ck, data, cfg.log.empty() ? nullptr : &log, progress);
  if (!cfg.checkpoint.empty()) save_checkpoint(ck, cfg.checkpoint);
  if (out) *out = std::move(ck);
  return res;
}

struct EvalOutcome {
  EvalReport report;
  double sequence_accuracy = 0.0;
  std::vector<SpottingRecord> predictions;
};

/// Greedy-decodes every dataset image and scores the transcripts, paired
/// with the ground-truth regions, through evaluate_spotting.
inline EvalOutcome run_eval(Model& model, const std::vector<LabeledImage>& data) {
  EvalOutcome out;
  std::vector<SpottingRecord> gts;
  std::size_t exact = 0;
  for (const LabeledImage& s : data) {
    SpottingRecord pred = s.record;
    pred.text = model.read_text(s.image);
    if (pred.text == s.record.text) ++exact;
    out.predictions.push_back(pred);
    gts.push_back(s.record);
  }
  out.report = evaluate_spotting(out.predictions, gts);
  out.sequence_accuracy = data.empty() ? 0.0 : static_cast<double>(exact) / static_cast<double>(data.size());
  return out;
}

/// Attention map as an 8-bit image, rescaled so the largest weight is 255.
inline GrayImage attention_heatmap(const Tensor& alpha) {
  GrayImage img(alpha.dim(0), alpha.dim(1));
  const double mx = *std::max_element(alpha.values.begin(), alpha.values.end());
  for (std::size_t i = 0; i < alpha.size(); ++i) img.pixels[i] = mx > 0 ? alpha.values[i] / mx : 0.0;
  return img;
}

inline std::string attention_csv(const Tensor& alpha) {
  std::string s;
  const std::size_t h = alpha.dim(0), w = alpha.dim(1);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) s += (j ? "," : "") + format_real(alpha.values[i * w + j]);
    s += "\n";
  }
  return s;
}

struct Prediction {
  std::string text;
  GreedyOutput decode;
};

/// Decodes one image; when `out_dir` is non-empty writes transcript.txt and,
/// for each of the T steps, attention_NN.pgm and attention_NN.csv.
inline Prediction run_predict(Model& model, const GrayImage& img, const std::filesystem::path& out_dir) {
  Prediction p;
  p.decode = model.decode(img);
  p.text = ids_to_utf8(p.decode.ids, model.vocab());
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    {
      std::ofstream t(out_dir / "transcript.txt", std::ios::binary);
      if (!t) fail(ErrorKind::io, "cannot write " + (out_dir / "transcript.txt").string());
      t << p.text << '\n';
    }
    for (std::size_t s = 0; s < p.decode.attention.alphas.size(); ++s) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "attention_%02zu", s + 1);
      const Tensor& a = p.decode.attention.alphas[s];
      write_pgm((out_dir / (std::string(stem) + ".pgm")).string(), attention_heatmap(a));
      std::ofstream csv(out_dir / (std::string(stem) + ".csv"), std::ios::binary);
      if (!csv) fail(ErrorKind::io, "cannot write attention CSV in " + out_dir.string());
      csv << attention_csv(a);
    }
  }
  return p;
}

}  // namespace attnocr
