// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

// Shared by the unit tests and the acceptance runner: finite-difference
// gradient checking, independent reference implementations, and small
// fixtures.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "attnocr/attnocr.hpp"

namespace attnocr::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values) v = u(rng);
  return t;
}

// ---------------------------------------------------------------------------
// Central finite differences
// ---------------------------------------------------------------------------

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// gradient is ~0 from turning truncation noise into a huge ratio.
inline double grad_rel_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheckReport {
  double max_rel = 0.0;
  std::size_t coords = 0;
  std::string worst;  // "<group>[<index>] analytic=.. numeric=.."

  void merge(const GradCheckReport& o) {
    coords += o.coords;
    if (o.max_rel > max_rel) {
      max_rel = o.max_rel;
      worst = o.worst;
    }
  }
};

/// Coordinates to probe: all of them for small groups, otherwise `per_group`
/// distinct random ones.
inline std::vector<std::size_t> probe_coords(std::size_t n, std::size_t per_group, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n <= per_group) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(per_group);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Checks d loss / d slot for every named group of value slots. `slot(g, k)`
/// points at the source value (an owned leaf or a bound parameter); the
/// record is replayed after every perturbation.
inline GradCheckReport check_slots(Tape& tape, Var loss, const std::vector<std::string>& names,
                                   const std::vector<std::size_t>& sizes,
                                   const std::function<double*(std::size_t, std::size_t)>& slot,
                                   const std::function<double(std::size_t, std::size_t)>& analytic,
                                   std::size_t per_group, std::mt19937_64& rng, double eps) {
  GradCheckReport rep;
  for (std::size_t g = 0; g < names.size(); ++g)
    for (std::size_t k : probe_coords(sizes[g], per_group, rng)) {
      double* v = slot(g, k);
      const double saved = *v;
      *v = saved + eps;
      tape.replay();
      const double fp = loss.item();
      *v = saved - eps;
      tape.replay();
      const double fm = loss.item();
      *v = saved;
      const double num = (fp - fm) / (2.0 * eps);
      const double an = analytic(g, k);
      const double rel = grad_rel_error(an, num);
      ++rep.coords;
      if (rel >= rep.max_rel) {
        rep.max_rel = rel;
        rep.worst = names[g] + "[" + std::to_string(k) + "] analytic=" + format_real(an) +
                    " numeric=" + format_real(num);
      }
    }
  tape.replay();
  return rep;
}

using LeafFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Gradient check of a scalar function of owned leaves.
inline GradCheckReport gradcheck(const std::vector<Tensor>& inputs, const LeafFn& f, std::mt19937_64& rng,
                                 std::size_t per_group = 16, double eps = 1e-4) {
  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  Var loss = f(tape, leaves);
  tape.backward(loss);
  std::vector<std::vector<double>> grads;
  std::vector<std::string> names;
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    grads.push_back(leaves[i].grad());
    names.push_back("input" + std::to_string(i));
    sizes.push_back(leaves[i].size());
  }
  return check_slots(
      tape, loss, names, sizes, [&](std::size_t g, std::size_t k) { return &tape.out(leaves[g].id).values[k]; },
      [&](std::size_t g, std::size_t k) { return grads[g][k]; }, per_group, rng, eps);
}

/// Reduces any output to a scalar with fixed random weights, so every output
/// coordinate receives a distinct upstream gradient.
inline Var weighted_sum(Var y, std::mt19937_64& rng) {
  Var w = y.tape->constant(random_tensor(y.shape(), rng));
  return sum(mul(y, w));
}

/// Gradient check of the full teacher-forced loss over every model parameter.
inline GradCheckReport gradcheck_model(Model& model, const GrayImage& img, const TokenSequence& target,
                                       std::mt19937_64& rng, std::size_t per_group = 5, double eps = 1e-4) {
  model.zero_grad();
  Tape tape;
  Var loss = model.loss(tape, img, target);
  tape.backward(loss);
  auto named = model.named_parameters();
  std::vector<std::string> names;
  std::vector<std::size_t> sizes;
  for (auto& [n, t] : named) {
    names.push_back(n);
    sizes.push_back(t->size());
  }
  return check_slots(
      tape, loss, names, sizes, [&](std::size_t g, std::size_t k) { return &named[g].second->values[k]; },
      [&](std::size_t g, std::size_t k) { return named[g].second->grad[k]; }, per_group, rng, eps);
}

// Finite-difference checks of every differentiable op.
struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  testing::LeafFn f;
};

inline std::vector<OpCase> op_cases() {
  auto rng = std::make_shared<std::mt19937_64>(99);
  auto ws = [rng](Var y) { return weighted_sum(y, *rng); };
  return {
      {"matmul", {{3, 4}, {4, 2}}, [=](Tape&, const std::vector<Var>& v) { return ws(matmul(v[0], v[1])); }},
      {"conv_same_s1", {{5, 6, 2}, {3, 3, 2, 3}},
       [=](Tape&, const std::vector<Var>& v) { return ws(conv2d(v[0], v[1], 1, Padding::same)); }},
      {"conv_same_s2", {{7, 6, 2}, {3, 3, 2, 2}},
       [=](Tape&, const std::vector<Var>& v) { return ws(conv2d(v[0], v[1], 2, Padding::same)); }},
      {"conv_valid_asym", {{5, 6, 2}, {1, 3, 2, 2}},
       [=](Tape&, const std::vector<Var>& v) { return ws(conv2d(v[0], v[1], 1, Padding::valid)); }},
      {"conv_col", {{5, 4, 1}, {3, 1, 1, 2}},
       [=](Tape&, const std::vector<Var>& v) { return ws(conv2d(v[0], v[1], 1, Padding::same)); }},
      {"tanh", {{3, 3}}, [=](Tape&, const std::vector<Var>& v) { return ws(tanh(v[0])); }},
      {"sigmoid", {{3, 3}}, [=](Tape&, const std::vector<Var>& v) { return ws(sigmoid(v[0])); }},
      {"exp", {{3, 3}}, [=](Tape&, const std::vector<Var>& v) { return ws(exp(v[0])); }},
      {"scale", {{2, 3}}, [=](Tape&, const std::vector<Var>& v) { return ws(scale(v[0], -2.5)); }},
      {"add", {{2, 3}, {2, 3}}, [=](Tape&, const std::vector<Var>& v) { return ws(add(v[0], v[1])); }},
      {"sub", {{2, 3}, {2, 3}}, [=](Tape&, const std::vector<Var>& v) { return ws(sub(v[0], v[1])); }},
      {"mul", {{2, 3}, {2, 3}}, [=](Tape&, const std::vector<Var>& v) { return ws(mul(v[0], v[1])); }},
      {"mul_shared", {{2, 3}}, [=](Tape&, const std::vector<Var>& v) { return ws(mul(v[0], v[0])); }},
      {"softmax", {{2, 4}}, [=](Tape&, const std::vector<Var>& v) { return ws(softmax(v[0])); }},
      {"reshape", {{2, 6}}, [=](Tape&, const std::vector<Var>& v) { return ws(tanh(reshape(v[0], {3, 4}))); }},
      {"concat", {{2, 2}, {3}}, [=](Tape&, const std::vector<Var>& v) { return ws(tanh(concat({v[0], v[1]}))); }},
      {"slice", {{2, 5}}, [=](Tape&, const std::vector<Var>& v) { return ws(tanh(slice(v[0], 3, 4))); }},
      {"gather_rows", {{4, 3}},
       [=](Tape&, const std::vector<Var>& v) { return ws(tanh(gather_rows(v[0], {3, 1, 3}))); }},
      {"mean_rows", {{4, 3}}, [=](Tape&, const std::vector<Var>& v) { return ws(tanh(mean_rows(v[0]))); }},
      {"sum", {{3, 2}}, [=](Tape&, const std::vector<Var>& v) { return ws(tanh(sum(v[0]))); }},
      {"add_bias", {{3, 4}, {1, 4}}, [=](Tape&, const std::vector<Var>& v) { return ws(tanh(add_bias(v[0], v[1]))); }},
      {"masked_ce", {{4, 5}},
       [=](Tape&, const std::vector<Var>& v) {
         return masked_cross_entropy(v[0], std::vector<std::size_t>{1, 4, 0, 4},
                                     std::vector<double>{1, 1, 0, 0});
       }},
      {"classification", {{3, 4}},
       [=](Tape&, const std::vector<Var>& v) { return classification_loss(v[0], one_hot({0, 3, 2}, 4)); }},
      {"smooth_l1", {{2, 4}},
       [=](Tape&, const std::vector<Var>& v) {
         // Targets far from the kink at |x| = 1 so the central difference
         // never straddles it.
         return smooth_l1(scale(v[0], 3.0), Tensor({8}, std::vector<double>{0.1, -5, 0.2, 6, 0.0, 0.3, -7, 0.05}));
       }},
  };
}

// ---------------------------------------------------------------------------
// Independent reference implementations
// ---------------------------------------------------------------------------

/// Levenshtein distance straight from its recursive definition on prefix
/// lengths, memoized so that length-6 pairs stay cheap.
inline std::size_t levenshtein_recursive(std::u32string_view a, std::u32string_view b) {
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  std::function<std::size_t(std::size_t, std::size_t)> lev = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == 0) return j;
    if (j == 0) return i;
    if (memo[i][j] >= 0) return static_cast<std::size_t>(memo[i][j]);
    const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
    const std::size_t d = std::min({lev(i - 1, j) + 1, lev(i, j - 1) + 1, lev(i - 1, j - 1) + cost});
    memo[i][j] = static_cast<long>(d);
    return d;
  };
  return lev(a.size(), b.size());
}

/// Anchor labelling by direct application of the rules, one anchor at a time.
inline MatchResult brute_force_match(const std::vector<Box>& anchors, const std::vector<Box>& gts, double pos,
                                     double neg) {
  MatchResult r;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    double best = 0.0;
    long best_g = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double v = box_iou(anchors[a], gts[g]);
      if (best_g < 0 || v > best) {
        best = v;
        best_g = static_cast<long>(g);
      }
    }
    // Is this anchor the (possibly tied) best anchor of some gt?
    long best_for = -1;
    for (std::size_t g = 0; g < gts.size() && best_for < 0; ++g) {
      double top = 0.0;
      for (const Box& other : anchors) top = std::max(top, box_iou(other, gts[g]));
      if (top > 0.0 && box_iou(anchors[a], gts[g]) == top) best_for = static_cast<long>(g);
    }
    if (!gts.empty() && best >= pos) {
      r.labels.push_back(AnchorLabel::positive);
      r.matched_gt.push_back(best_g);
    } else if (best_for >= 0) {
      r.labels.push_back(AnchorLabel::positive);
      r.matched_gt.push_back(best_for);
    } else {
      r.labels.push_back(best < neg ? AnchorLabel::negative : AnchorLabel::ignore);
      r.matched_gt.push_back(-1);
    }
  }
  return r;
}

/// Mask by the rule "1 up to and including the first EOS, 0 after it",
/// computed from the ids alone.
inline std::vector<double> mask_rule(const std::vector<std::size_t>& ids, std::size_t eos) {
  std::vector<double> m;
  bool seen_eos = false;
  for (std::size_t id : ids) {
    m.push_back(seen_eos ? 0.0 : 1.0);
    if (id == eos) seen_eos = true;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("attnocr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Small model for tests that need many forward passes.
inline Config tiny_config() {
  Config c;
  c.max_length = 5;
  c.embed_dim = 6;
  c.hidden_dim = 8;
  c.attention_dim = 7;
  c.encoder.input_height = 12;
  c.encoder.input_width = 20;
  c.encoder.stem_channels = 3;
  c.encoder.asym_channels = 4;
  c.encoder.down_channels = {5, 6};
  c.log = "";
  c.checkpoint = "";
  return c;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace attnocr::testing
