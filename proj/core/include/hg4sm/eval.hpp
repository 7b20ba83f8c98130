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

#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace hg4sm::eval {

struct ScoredExample {
  double score;
  int label;  // 0 or 1
};

// Mann-Whitney AUC: probability a random positive outscores a random
// negative, ties counted 1/2. Throws on single-class input.
double auc(std::span<const ScoredExample> examples);

// Confusion counts plus every derived ratio. Ratios with a zero denominator
// are reported as 0 with their *_defined flag cleared. FNR and FPR are easy
// to conflate in published metric tables, so both are always emitted.
struct EvalReport {
  double auc = 0.0;
  double acc = 0.0;
  double prec = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fnr = 0.0;  // FN / (FN + TP)
  double fpr = 0.0;  // FP / (FP + TN)
  double threshold = 0.5;
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  bool auc_defined = false;
  bool prec_defined = false;
  bool recall_defined = false;  // also covers fnr
  bool f1_defined = false;
  bool fpr_defined = false;

  bool any_undefined() const {
    return !(auc_defined && prec_defined && recall_defined && f1_defined && fpr_defined);
  }
  std::string to_json() const;
};

// Predict positive iff score >= threshold; auc left undefined here.
EvalReport confusion_metrics(std::span<const ScoredExample> examples, double threshold);

// confusion_metrics plus AUC (flagged undefined on single-class input
// instead of throwing).
EvalReport evaluate(std::span<const ScoredExample> examples, double threshold);

}  // namespace hg4sm::eval
