// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "attnocr/autodiff/ops.hpp"

namespace attnocr {

namespace detail {

/// log-sum-exp of row r of a [rows x k] buffer.
inline double row_logsumexp(const double* z, std::size_t k) {
  const double mx = *std::max_element(z, z + k);
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - mx);
  return mx + std::log(s);
}

/// sum_r w_r * CE(row r), with gradient (softmax - p) * w_r.
inline Var weighted_row_ce(Var logits, const Tensor& targets, std::vector<double> weights, const char* op) {
  if (logits.shape().size() != 2)
    fail(ErrorKind::shape, std::string(op) + ": logits must be [rows x classes], got " + shape_str(logits.shape()));
  const std::size_t rows = logits.shape()[0], k = logits.shape()[1];
  if (targets.size() != rows * k)
    fail(ErrorKind::shape, std::string(op) + ": targets " + shape_str(targets.shape) + " vs logits " +
                               shape_str(logits.shape()));
  const std::vector<double> p = targets.values;
  const std::size_t li = logits.id;
  return logits.tape->op(
      {1}, {li},
      [=](Tape& tp, Tape::Node& self) {
        const double* z = tp.out(li).values.data();
        double total = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
          if (weights[r] == 0.0) continue;
          const double lse = row_logsumexp(z + r * k, k);
          double ce = 0.0;
          for (std::size_t j = 0; j < k; ++j)
            if (p[r * k + j] != 0.0) ce -= p[r * k + j] * (z[r * k + j] - lse);
          total += weights[r] * ce;
        }
        self.out.values[0] = total;
      },
      [=](Tape& tp, Tape::Node& self) {
        double* g = tp.grad_of(li);
        if (!g) return;
        const double* z = tp.out(li).values.data();
        const double up = self.out.grad[0];
        for (std::size_t r = 0; r < rows; ++r) {
          if (weights[r] == 0.0) continue;
          const double lse = row_logsumexp(z + r * k, k);
          double mass = 0.0;
          for (std::size_t j = 0; j < k; ++j) mass += p[r * k + j];
          for (std::size_t j = 0; j < k; ++j)
            g[r * k + j] += up * weights[r] * (mass * std::exp(z[r * k + j] - lse) - p[r * k + j]);
        }
      });
}

}  // namespace detail

/// One-hot rows [ids.size() x k].
inline Tensor one_hot(const std::vector<std::size_t>& ids, std::size_t k) {
  Tensor t({ids.size(), k}, 0.0);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= k) fail(ErrorKind::shape, "one_hot: id " + std::to_string(ids[r]) + " >= " + std::to_string(k));
    t.values[r * k + ids[r]] = 1.0;
  }
  return t;
}

/// Masked cross entropy: -sum_t m_t p_t . log softmax(q_t) / sum_t m_t.
/// Steps with m_t = 0 contribute nothing, neither value nor gradient.
inline Var masked_cross_entropy(Var logits, const Tensor& targets, std::span<const double> mask) {
  if (logits.shape().size() != 2 || mask.size() != logits.shape()[0])
    fail(ErrorKind::shape, "masked_cross_entropy: mask of length " + std::to_string(mask.size()) +
                               " for logits " + shape_str(logits.shape()));
  double denom = 0.0;
  for (double m : mask) denom += m;
  if (denom <= 0.0) fail(ErrorKind::numeric, "masked_cross_entropy: mask has no active step");
  std::vector<double> w(mask.begin(), mask.end());
  for (double& v : w) v /= denom;
  return detail::weighted_row_ce(logits, targets, std::move(w), "masked_cross_entropy");
}

inline Var masked_cross_entropy(Var logits, const std::vector<std::size_t>& target_ids,
                                std::span<const double> mask) {
  return masked_cross_entropy(logits, one_hot(target_ids, logits.shape().at(1)), mask);
}

/// Softmax cross-entropy of label logits against one-hot labels, averaged
/// over rows. Accepts a single [k] vector or [rows x k].
inline Var classification_loss(Var logits, const Tensor& labels) {
  if (logits.shape() != labels.shape)
    fail(ErrorKind::shape, "classification_loss: logits " + shape_str(logits.shape()) + " vs labels " +
                               shape_str(labels.shape));
  Var z = logits.shape().size() == 1 ? reshape(logits, {1, logits.size()}) : logits;
  const std::size_t rows = z.shape()[0];
  return detail::weighted_row_ce(z, labels, std::vector<double>(rows, 1.0 / static_cast<double>(rows)),
                                 "classification_loss");
}

/// Sum over coordinates of 0.5 x^2 (|x| < 1) or |x| - 0.5.
inline Var smooth_l1(Var pred, const Tensor& target) {
  if (pred.size() != target.size())
    fail(ErrorKind::shape, "smooth_l1: " + std::to_string(pred.size()) + " predicted vs " +
                               std::to_string(target.size()) + " target coordinates");
  const std::vector<double> gt = target.values;
  const std::size_t pi = pred.id;
  return pred.tape->op(
      {1}, {pi},
      [=](Tape& tp, Tape::Node& self) {
        const auto& b = tp.out(pi).values;
        double s = 0.0;
        for (std::size_t k = 0; k < b.size(); ++k) {
          const double x = b[k] - gt[k];
          s += std::abs(x) < 1.0 ? 0.5 * x * x : std::abs(x) - 0.5;
        }
        self.out.values[0] = s;
      },
      [=](Tape& tp, Tape::Node& self) {
        double* g = tp.grad_of(pi);
        if (!g) return;
        const auto& b = tp.out(pi).values;
        for (std::size_t k = 0; k < b.size(); ++k) {
          const double x = b[k] - gt[k];
          const double d = std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0);
          g[k] += self.out.grad[0] * d;
        }
      });
}

/// One refinement stage of a cascade head.
struct CascadeStage {
  Var cls_logits;
  Tensor cls_labels;
  Var box_pred;
  Tensor box_target;
};

/// sum over stages of classification + smooth-L1 localization.
inline Var cascade_loss(const std::vector<CascadeStage>& stages) {
  if (stages.empty()) fail(ErrorKind::shape, "cascade_loss: no stages");
  Var total = add(classification_loss(stages[0].cls_logits, stages[0].cls_labels),
                  smooth_l1(stages[0].box_pred, stages[0].box_target));
  for (std::size_t i = 1; i < stages.size(); ++i) {
    total = add(total, classification_loss(stages[i].cls_logits, stages[i].cls_labels));
    total = add(total, smooth_l1(stages[i].box_pred, stages[i].box_target));
  }
  return total;
}

/// Default IoU thresholds of successive cascade stages.
inline const std::vector<double> kCascadeIouThresholds{0.5, 0.6, 0.7};

/// Total and its named parts. `total` is the sum of every component except
/// "reg", which enters weighted by `reg_weight`.
struct LossBreakdown {
  double total = 0.0;
  std::map<std::string, double> components;
  double reg_weight = 0.0;

  double recompute_total() const {
    double s = 0.0;
    for (const auto& [name, v] : components) s += name == "reg" ? reg_weight * v : v;
    return s;
  }
};

/// sum of p^2 over every parameter.
inline double l2_sum(std::span<const Tensor* const> params) {
  double s = 0.0;
  for (const Tensor* p : params)
    for (double v : p->values) s += v * v;
  return s;
}

/// L_rpn + L_cascade + L_mask + lambda * sum(p^2).
inline LossBreakdown total_detection_loss(double rpn, double cascade, double mask,
                                          std::span<const Tensor* const> params, double lambda) {
  LossBreakdown b;
  b.reg_weight = lambda;
  b.components = {{"rpn", rpn}, {"cascade", cascade}, {"mask", mask}, {"reg", l2_sum(params)}};
  b.total = rpn + cascade + mask + lambda * b.components["reg"];
  return b;
}

/// Recognition objective: MCE + lambda * sum(p^2).
inline LossBreakdown recognition_loss(double mce, std::span<const Tensor* const> params, double lambda) {
  LossBreakdown b;
  b.reg_weight = lambda;
  b.components = {{"mce", mce}, {"reg", l2_sum(params)}};
  b.total = mce + lambda * b.components["reg"];
  return b;
}

}  // namespace attnocr
