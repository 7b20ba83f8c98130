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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hg4sm/eval.hpp"
#include "hg4sm/graph.hpp"
#include "hg4sm/model.hpp"

namespace hg4sm::train {

enum class ExampleSource : std::uint8_t { GraphPositive, SampledNegative, Explicit };

struct TrainExample {
  std::string query;
  std::string title;
  int label = 0;
  ExampleSource source = ExampleSource::Explicit;
  std::optional<graph::NodeRef> query_ref;
  std::optional<graph::NodeRef> item_ref;
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int negatives_per_positive = 1;
  std::uint64_t seed = 1;
  bool exclude_focus_edge = true;  // leakage guard while training
  double holdout_fraction = 0.2;   // held out BY QUERY
  bool finetune_embeddings = false;
  int threads = 1;  // >1: sharded gradient accumulation, fixed-order reduction

  void validate() const;
};

enum class NegativeSampling : std::uint8_t {
  Uniform,     // uniform over items
  Popularity,  // proportional to 1 + an item's total click+purchase count
};

NegativeSampling parse_negative_sampling(std::string_view name);

// Positives: every refined edge. Negatives: per positive, `ratio` sampled
// items that are not neighbors of the positive's query. Deterministic per
// seed. Throws "no positives" on an edgeless graph.
std::vector<TrainExample> make_training_set(const graph::BipartiteGraph& g, int ratio,
                                            std::uint64_t seed,
                                            NegativeSampling sampling = NegativeSampling::Uniform);

// Optional Explicit source, TSV query<TAB>title<TAB>label. Node refs are
// resolved against the graph when one is supplied.
std::vector<TrainExample> load_labeled_examples(const std::string& path,
                                                const graph::BipartiteGraph* g);

void save_dataset(std::span<const TrainExample> dataset, const std::string& path);
std::vector<TrainExample> load_dataset(const std::string& path,
                                       const graph::BipartiteGraph* g);

struct EpochStats {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double holdout_auc = 0.0;
  bool holdout_auc_defined = false;
};

struct TrainResult {
  model::ModelParams params;
  std::vector<EpochStats> history;
  // Final-model scores on the held-out split, aligned with holdout_indices.
  std::vector<eval::ScoredExample> holdout_scores;
  std::vector<std::size_t> holdout_indices;  // indices into the input dataset
};

// Mini-batch Adam over the dataset with a by-query held-out split.
// Deterministic per (seed, dataset, config) when threads == 1.
TrainResult train(model::ModelParams params, const std::vector<TrainExample>& dataset,
                  const graph::BipartiteGraph& g, const text::Vocab& vocab,
                  const model::ModelConfig& mcfg, const TrainConfig& tcfg);

// JSON-lines, one record per epoch: {"epoch":..,"mean_loss":..,"holdout_auc":..}
std::string history_to_jsonl(std::span<const EpochStats> history);
void write_history_jsonl(std::span<const EpochStats> history, const std::string& path);

}  // namespace hg4sm::train
