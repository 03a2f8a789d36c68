// Copyright 2026 The attnocr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <string>

#include "json.hpp"

#include "attnocr/metrics.hpp"

namespace attnocr {

inline nlohmann::json to_json(const EvalReport& r, bool with_pairs = true) {
  nlohmann::json j = {{"recall", r.recall},
                      {"precision", r.precision},
                      {"hmean", r.hmean},
                      {"one_minus_ned", r.one_minus_ned},
                      {"num_gt", r.num_gt},
                      {"num_pred", r.num_pred},
                      {"true_positives", r.true_positives}};
  if (with_pairs) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const PairDetail& p : r.pairs)
      pairs.push_back({{"gt", p.gt},
                       {"pred", p.pred},
                       {"iou", p.iou},
                       {"gt_text", p.gt_text},
                       {"pred_text", p.pred_text},
                       {"edit_distance", p.edit_distance},
                       {"text_match", p.text_match}});
    j["pairs"] = pairs;
  }
  return j;
}

/// Fixed-width summary table.
inline std::string format_report_table(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-10s %10s\n"
                "%-10s %9.2f%%\n"
                "%-10s %9.2f%%\n"
                "%-10s %9.2f%%\n"
                "%-10s %9.2f%%\n"
                "%-10s %10zu\n"
                "%-10s %10zu\n"
                "%-10s %10zu\n",
                "metric", "value", "Recall", 100.0 * r.recall, "Precision", 100.0 * r.precision, "Hmean",
                100.0 * r.hmean, "1-N.E.D", 100.0 * r.one_minus_ned, "gt", r.num_gt, "pred", r.num_pred, "tp",
                r.true_positives);
  return buf;
}

}  // namespace attnocr
