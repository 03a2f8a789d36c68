// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: synth, train, eval, predict, metrics, geom-check.
//
// Configuration precedence for train / eval / predict (later wins):
//   built-in desk defaults < --preset < --config FILE < --set key=value ...
// Errors print one line "error: <category>: <message>" to stderr and exit
// with the category's code (usage 2, io 3, format 4, shape 5, numeric 6,
// config 7).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "attnocr/attnocr.hpp"

namespace {

using namespace attnocr;

struct ConfigArgs {
  std::string preset;
  std::string file;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "desk | full");
    cmd->add_option("--config", file, "key=value configuration file");
    cmd->add_option("--set", sets, "override one key (key=value), repeatable");
  }

  Config resolve() const {
    Config c;
    if (!preset.empty()) set_config_value(c, "preset", preset);
    if (!file.empty()) apply_config_file(c, file);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(ErrorKind::usage, "--set expects key=value, got '" + kv + "'");
      set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    return c;
  }

  bool given() const { return !preset.empty() || !file.empty() || !sets.empty(); }
};

void print_seed(std::uint64_t seed) { std::cout << "seed: " << seed << std::endl; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out << text;
}

int cmd_synth(const std::string& out, const DatasetSpec& spec) {
  print_seed(spec.seed);
  const auto index = generate_dataset(out, spec);
  std::cout << "wrote " << index.size() << " samples to " << out << std::endl;
  return 0;
}

int cmd_train(const ConfigArgs& args) {
  const Config cfg = args.resolve();
  print_seed(cfg.seed);
  const TrainingResult res = run_training(cfg, nullptr, [&](std::size_t step, double mce) {
    if (step % 100 == 0 || step == cfg.max_steps) std::cout << "step " << step << " mce " << mce << std::endl;
  });
  std::cout << "trained " << res.steps << " steps" << (res.stopped_early ? " (accuracy target reached)" : "")
            << "; checkpoint " << cfg.checkpoint << std::endl;
  return 0;
}

Checkpoint open_checkpoint(const std::string& path, const ConfigArgs& args) {
  if (!args.given()) return load_checkpoint(path);
  const Config expected = args.resolve();
  return load_checkpoint(path, &expected);
}

int cmd_eval(const std::string& ckpt, std::string data, const std::string& json_out, const std::string& pred_out,
             const ConfigArgs& args) {
  Checkpoint ck = open_checkpoint(ckpt, args);
  print_seed(ck.config.seed);
  if (data.empty()) data = ck.config.eval_data;
  if (data.empty()) fail(ErrorKind::usage, "eval: no dataset given (--data or eval_data)");
  const auto samples = load_dataset(data, ck.model.vocab(), ck.model.max_length());
  const EvalOutcome out = run_eval(ck.model, samples);
  std::cout << format_report_table(out.report);
  std::cout << "sequence accuracy " << out.sequence_accuracy << std::endl;
  nlohmann::json j = to_json(out.report);
  j["sequence_accuracy"] = out.sequence_accuracy;
  if (!json_out.empty()) write_text(json_out, j.dump(2) + "\n");
  else std::cout << j.dump() << std::endl;
  if (!pred_out.empty()) write_spotting_file(pred_out, out.predictions);
  return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& image, const std::string& out_dir,
                const ConfigArgs& args) {
  Checkpoint ck = open_checkpoint(ckpt, args);
  print_seed(ck.config.seed);
  const Prediction p = run_predict(ck.model, read_pgm(image), out_dir);
  std::cout << p.text << std::endl;
  return 0;
}

int cmd_metrics(const std::string& pred, const std::string& gt, const std::string& json_out, bool pairs) {
  print_seed(0);
  const EvalReport r = evaluate_spotting(read_spotting_file(pred), read_spotting_file(gt));
  std::cout << format_report_table(r);
  const nlohmann::json j = to_json(r, pairs);
  if (!json_out.empty()) write_text(json_out, j.dump(2) + "\n");
  else std::cout << j.dump() << std::endl;
  return 0;
}

// Self-test of the anchor / IoU code against hand values and a brute-force
// matcher. Prints one line per check; nonzero exit if any fails.
int cmd_geom_check(std::uint64_t seed, std::size_t instances) {
  print_seed(seed);
  int failed = 0;
  auto report = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "ok    " : "FAIL  ") << what << std::endl;
    if (!ok) ++failed;
  };

  const AnchorGrid g = generate_anchors(2, 2, 16.0, {32.0}, kTextAnchorRatios);
  report(g.anchors.size() == 28, "2x2 grid, 1 scale, 7 ratios -> 28 anchors");
  const AnchorGrid wide = generate_anchors(1, 1, 16.0, {16.0}, {0.25});
  const Box& a = wide.anchors[0];
  report(std::abs((a.x2 - a.x1) - 32.0) < 1e-12 && std::abs((a.y2 - a.y1) - 8.0) < 1e-12,
         "scale 16, ratio 1/4 -> 32 x 8");
  report(std::abs(box_iou({0, 0, 2, 2}, {1, 0, 3, 2}) - 1.0 / 3.0) < 1e-12, "half-shifted squares IoU = 1/3");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, 64.0), len(2.0, 40.0);
  auto random_box = [&] {
    const double x = pos(rng), y = pos(rng);
    return Box{x, y, x + len(rng), y + len(rng)};
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const Box anchor = random_box(), gt = random_box();
    const Box back = decode_box_deltas(anchor, encode_box_deltas(anchor, gt));
    worst = std::max({worst, std::abs(back.x1 - gt.x1), std::abs(back.y1 - gt.y1), std::abs(back.x2 - gt.x2),
                      std::abs(back.y2 - gt.y2)});
  }
  report(worst <= 1e-9, "box delta encode/decode round trip (max err " + format_real(worst) + ")");

  const AnchorGrid grid = generate_anchors(8, 8, 8.0, {16.0, 32.0}, kTextAnchorRatios);
  const Box gt_box{12.0, 24.0, 44.0, 32.0};  // 32 x 8, centred on an anchor
  auto count_pos = [&](const std::vector<double>& ratios) {
    const AnchorGrid gg = generate_anchors(8, 8, 8.0, {16.0, 32.0}, ratios);
    std::size_t n = 0;
    for (const Box& b : gg.anchors)
      if (box_iou(b, gt_box) >= 0.7) ++n;
    return n;
  };
  const std::size_t text_pos = count_pos(kTextAnchorRatios), default_pos = count_pos(kDefaultAnchorRatios);
  report(text_pos > default_pos, "4:1 box: " + std::to_string(text_pos) + " anchors at IoU>=0.7 with text ratios vs " +
                                     std::to_string(default_pos) + " with {1/2,1,2}");
  const MatchResult m = match_anchors(grid.anchors, {gt_box});
  std::size_t positives = 0;
  for (AnchorLabel l : m.labels) positives += l == AnchorLabel::positive;
  report(positives >= 1, "every gt gets at least one positive anchor");

  std::cout << (failed ? "geom-check FAILED" : "geom-check passed") << std::endl;
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attnocr: attention-based scene text recognition"};
  app.require_subcommand(1);

  std::string synth_out;
  DatasetSpec spec;
  auto* synth = app.add_subcommand("synth", "render a synthetic labelled dataset");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--count", spec.count, "number of samples")->capture_default_str();
  synth->add_option("--seed", spec.seed, "master seed")->capture_default_str();
  synth->add_option("--min-length", spec.min_length)->capture_default_str();
  synth->add_option("--max-length", spec.max_length)->capture_default_str();
  synth->add_option("--charset", spec.charset)->capture_default_str();
  synth->add_option("--height", spec.render.canvas_height)->capture_default_str();
  synth->add_option("--width", spec.render.canvas_width)->capture_default_str();

  ConfigArgs train_args;
  auto* train = app.add_subcommand("train", "train a model from a synthetic dataset");
  train_args.attach(train);

  ConfigArgs eval_args;
  std::string eval_ckpt, eval_data, eval_json, eval_preds;
  auto* eval = app.add_subcommand("eval", "greedy-decode a dataset and report recall/precision/H-mean/1-N.E.D");
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data, "dataset directory (default: eval_data from the checkpoint config)");
  eval->add_option("--json", eval_json, "write the JSON report here instead of stdout");
  eval->add_option("--predictions", eval_preds, "write predictions as a spotting file");
  eval_args.attach(eval);

  ConfigArgs pred_args;
  std::string pred_ckpt, pred_image, pred_out;
  auto* predict = app.add_subcommand("predict", "read one PGM image; dump transcript and attention maps");
  predict->add_option("--checkpoint", pred_ckpt)->required();
  predict->add_option("--image", pred_image)->required();
  predict->add_option("--out", pred_out, "directory for transcript.txt and attention_NN.{pgm,csv}");
  pred_args.attach(predict);

  std::string m_pred, m_gt, m_json;
  bool m_pairs = false;
  auto* metrics = app.add_subcommand("metrics", "score a spotting file against ground truth");
  metrics->add_option("--pred", m_pred)->required();
  metrics->add_option("--gt", m_gt)->required();
  metrics->add_option("--json", m_json);
  metrics->add_flag("--pairs", m_pairs, "include per-pair details in the JSON");

  std::uint64_t g_seed = 1;
  std::size_t g_instances = 100;
  auto* geom = app.add_subcommand("geom-check", "anchor / IoU / box-delta self test");
  geom->add_option("--seed", g_seed)->capture_default_str();
  geom->add_option("--instances", g_instances)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << std::endl;
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    if (*synth) return cmd_synth(synth_out, spec);
    if (*train) return cmd_train(train_args);
    if (*eval) return cmd_eval(eval_ckpt, eval_data, eval_json, eval_preds, eval_args);
    if (*predict) return cmd_predict(pred_ckpt, pred_image, pred_out, pred_args);
    if (*metrics) return cmd_metrics(m_pred, m_gt, m_json, m_pairs);
    if (*geom) return cmd_geom_check(g_seed, g_instances);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << std::endl;
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: io: " << e.what() << std::endl;
    return static_cast<int>(ErrorKind::io);
  }
  return 0;
}
