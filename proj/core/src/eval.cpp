// Copyright 2026 The hg4sm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hg4sm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <json.hpp>

#include "hg4sm/error.hpp"

namespace hg4sm::eval {

double auc(std::span<const ScoredExample> examples) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& e : examples) {
    if (!std::isfinite(e.score)) throw Error("auc: non-finite score");
    (e.label != 0 ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0) throw Error("AUC undefined: both classes required");

  // Tie-averaged rank sum over positives. Ranks are integers or half-integers,
  // so the numerator is exact in double arithmetic.
  std::vector<const ScoredExample*> sorted;
  sorted.reserve(examples.size());
  for (const auto& e : examples) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredExample* a, const ScoredExample* b) { return a->score < b->score; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j]->score == sorted[i]->score) ++j;
    // ranks i+1 .. j share the average rank
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (sorted[k]->label != 0) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  double np = static_cast<double>(n_pos);
  double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

EvalReport confusion_metrics(std::span<const ScoredExample> examples, double threshold) {
  if (examples.empty()) throw Error("confusion_metrics: no examples");
  EvalReport r;
  r.threshold = threshold;
  for (const auto& e : examples) {
    bool pred = e.score >= threshold;
    if (e.label != 0) {
      (pred ? r.tp : r.fn) += 1;
    } else {
      (pred ? r.fp : r.tn) += 1;
    }
  }
  const double total = static_cast<double>(r.tp + r.fp + r.fn + r.tn);
  r.acc = static_cast<double>(r.tp + r.tn) / total;

  if (r.tp + r.fp > 0) {
    r.prec = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
    r.prec_defined = true;
  }
  if (r.tp + r.fn > 0) {
    r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    r.fnr = static_cast<double>(r.fn) / static_cast<double>(r.tp + r.fn);
    r.recall_defined = true;
  }
  if (r.prec + r.recall > 0) {
    r.f1 = 2.0 * r.prec * r.recall / (r.prec + r.recall);
    r.f1_defined = r.prec_defined && r.recall_defined;
  }
  if (r.fp + r.tn > 0) {
    r.fpr = static_cast<double>(r.fp) / static_cast<double>(r.fp + r.tn);
    r.fpr_defined = true;
  }
  return r;
}

EvalReport evaluate(std::span<const ScoredExample> examples, double threshold) {
  EvalReport r = confusion_metrics(examples, threshold);
  try {
    r.auc = auc(examples);
    r.auc_defined = true;
  } catch (const Error&) {
    r.auc = 0.0;
    r.auc_defined = false;
  }
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j{
      {"auc", auc},
      {"acc", acc},
      {"prec", prec},
      {"recall", recall},
      {"f1", f1},
      {"fnr", fnr},
      {"fpr", fpr},
      {"threshold", threshold},
      {"tp", tp},
      {"fp", fp},
      {"fn", fn},
      {"tn", tn},
      {"flags",
       {{"auc_defined", auc_defined},
        {"prec_defined", prec_defined},
        {"recall_defined", recall_defined},
        {"f1_defined", f1_defined},
        {"fpr_defined", fpr_defined}}},
  };
  return j.dump();
}

}  // namespace hg4sm::eval
