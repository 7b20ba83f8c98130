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

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hg4sm/eval.hpp"
#include "hg4sm/trainer.hpp"

namespace hg4sm::eval {

// The component grid in its canonical report order.
std::vector<model::ComponentSet> ablation_grid();

struct AblationRun {
  model::ComponentSet subset;
  std::uint64_t seed;
  EvalReport report;  // on the held-out split of the trained model
};

struct MetricRow {
  double auc = 0, acc = 0, prec = 0, recall = 0, f1 = 0, fnr = 0, fpr = 0;
};

struct AblationTable {
  std::vector<AblationRun> runs;
  // Per-subset field-wise medians over seeds, in grid order.
  std::vector<std::pair<model::ComponentSet, MetricRow>> medians;

  // Columns: model, auc, acc, prec, recall, f1, fnr(-)
  std::string to_tsv() const;
  std::string to_json() const;
};

// Trains one model per (subset, seed) with identical data and splits, then
// evaluates the held-out split at `threshold`.
AblationTable ablation_run(const graph::BipartiteGraph& g,
                           const std::vector<train::TrainExample>& dataset,
                           const text::Vocab& vocab, const embed::EmbeddingTable& table,
                           const model::ModelConfig& base_model,
                           const train::TrainConfig& base_train,
                           std::span<const model::ComponentSet> subsets,
                           std::span<const std::uint64_t> seeds, double threshold);

}  // namespace hg4sm::eval
