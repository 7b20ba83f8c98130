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

#include "hg4sm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "field_escape.hpp"
#include "hg4sm/error.hpp"

namespace hg4sm::train {

using detail::escape_field;
using detail::split_tabs;
using detail::unescape_field;

namespace {

// Hand-rolled Fisher-Yates so shuffles do not depend on a standard library's
// distribution internals.
template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

const char* source_name(ExampleSource s) {
  switch (s) {
    case ExampleSource::GraphPositive: return "graph_pos";
    case ExampleSource::SampledNegative: return "sampled_neg";
    case ExampleSource::Explicit: return "explicit";
  }
  return "explicit";
}

ExampleSource parse_source(std::string_view s) {
  if (s == "graph_pos") return ExampleSource::GraphPositive;
  if (s == "sampled_neg") return ExampleSource::SampledNegative;
  if (s == "explicit") return ExampleSource::Explicit;
  throw Error("dataset: unknown example source '" + std::string(s) + "'");
}

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw Error("train: epochs must be >= 0");
  if (batch_size < 1) throw Error("train: batch size must be >= 1");
  if (learning_rate < 0.0) throw Error("train: learning rate must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw Error("train: Adam betas must be in [0,1)");
  }
  if (adam_eps <= 0.0) throw Error("train: Adam epsilon must be > 0");
  if (negatives_per_positive < 0) throw Error("train: negative ratio must be >= 0");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw Error("train: holdout fraction must be in [0,1)");
  }
  if (threads < 1) throw Error("train: threads must be >= 1");
}

NegativeSampling parse_negative_sampling(std::string_view name) {
  if (name == "uniform") return NegativeSampling::Uniform;
  if (name == "popularity") return NegativeSampling::Popularity;
  throw Error("make_training_set: unknown sampling '" + std::string(name) + "'");
}

std::vector<TrainExample> make_training_set(const graph::BipartiteGraph& g, int ratio,
                                            std::uint64_t seed, NegativeSampling sampling) {
  if (ratio < 0) throw Error("make_training_set: ratio must be >= 0");
  if (g.edge_count() == 0) throw Error("no positives");

  std::mt19937_64 rng(seed);
  const std::size_t n_items = g.item_count();

  // popularity weights: add-one-smoothed behavioral counters per item
  std::vector<double> cumulative;
  double total_weight = 0.0;
  if (sampling == NegativeSampling::Popularity) {
    std::vector<double> weight(n_items, 1.0);
    for (const auto& e : g.edges()) {
      weight[e.item_id] += static_cast<double>(e.clicks + e.purchases);
    }
    cumulative.reserve(n_items);
    for (auto w : weight) {
      total_weight += w;
      cumulative.push_back(total_weight);
    }
  }
  auto draw_item = [&]() -> std::uint32_t {
    if (sampling == NegativeSampling::Uniform) {
      return static_cast<std::uint32_t>(rng() % n_items);
    }
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total_weight;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    return static_cast<std::uint32_t>(it - cumulative.begin());
  };

  std::vector<TrainExample> out;
  out.reserve(g.edge_count() * static_cast<std::size_t>(1 + ratio));

  for (const auto& e : g.edges()) {
    TrainExample pos;
    pos.query = g.query_text(e.query_id);
    pos.title = g.item_title(e.item_id);
    pos.label = 1;
    pos.source = ExampleSource::GraphPositive;
    pos.query_ref = graph::NodeRef{graph::NodeKind::Query, e.query_id};
    pos.item_ref = graph::NodeRef{graph::NodeKind::Item, e.item_id};
    out.push_back(std::move(pos));

    for (int k = 0; k < ratio; ++k) {
      // same-query negative: an item the query has no edge to
      std::optional<std::uint32_t> pick;
      for (int tries = 0; tries < 1000; ++tries) {
        auto cand = draw_item();
        if (g.find_edge(e.query_id, cand) == nullptr) {
          pick = cand;
          break;
        }
      }
      if (!pick) continue;  // query adjacent to (nearly) every item
      TrainExample neg;
      neg.query = g.query_text(e.query_id);
      neg.title = g.item_title(*pick);
      neg.label = 0;
      neg.source = ExampleSource::SampledNegative;
      neg.query_ref = graph::NodeRef{graph::NodeKind::Query, e.query_id};
      neg.item_ref = graph::NodeRef{graph::NodeKind::Item, *pick};
      out.push_back(std::move(neg));
    }
  }
  return out;
}

std::vector<TrainExample> load_labeled_examples(const std::string& path,
                                                const graph::BipartiteGraph* g) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("labeled examples: cannot open: " + path);
  std::vector<TrainExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw Error("labeled examples: line " + std::to_string(lineno) + ": expected 3 fields");
    }
    TrainExample ex;
    ex.query = fields[0];
    ex.title = fields[1];
    if (fields[2] == "0") {
      ex.label = 0;
    } else if (fields[2] == "1") {
      ex.label = 1;
    } else {
      throw Error("labeled examples: line " + std::to_string(lineno) + ": label must be 0 or 1");
    }
    ex.source = ExampleSource::Explicit;
    if (g != nullptr) {
      ex.query_ref = g->find_query(ex.query);
      ex.item_ref = g->find_item_by_title(ex.title);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void save_dataset(std::span<const TrainExample> dataset, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("dataset: cannot open for write: " + path);
  f << "#hg4sm-dataset v1\n";
  for (const auto& ex : dataset) {
    f << escape_field(ex.query) << '\t'
      << (ex.item_ref ? std::to_string(ex.item_ref->id) : std::string("-")) << '\t'
      << escape_field(ex.title) << '\t' << ex.label << '\t' << source_name(ex.source) << '\n';
  }
  if (!f) throw Error("dataset: write failed: " + path);
}

std::vector<TrainExample> load_dataset(const std::string& path,
                                       const graph::BipartiteGraph* g) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("dataset: cannot open: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "#hg4sm-dataset v1") {
    throw Error("dataset: missing or bad header in " + path);
  }
  std::vector<TrainExample> out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 5) {
      throw Error("dataset: line " + std::to_string(lineno) + ": expected 5 fields");
    }
    TrainExample ex;
    ex.query = unescape_field(fields[0]);
    ex.title = unescape_field(fields[2]);
    if (fields[3] != "0" && fields[3] != "1") {
      throw Error("dataset: line " + std::to_string(lineno) + ": label must be 0 or 1");
    }
    ex.label = fields[3] == "1" ? 1 : 0;
    ex.source = parse_source(fields[4]);
    if (g != nullptr) {
      ex.query_ref = g->find_query(ex.query);
      std::optional<std::uint32_t> id;
      if (fields[1] != "-") {
        try {
          id = static_cast<std::uint32_t>(std::stoul(fields[1]));
        } catch (const std::exception&) {
          throw Error("dataset: line " + std::to_string(lineno) + ": bad item id");
        }
      }
      if (id && *id < g->item_count() && g->item_title(*id) == ex.title) {
        ex.item_ref = graph::NodeRef{graph::NodeKind::Item, *id};
      } else {
        ex.item_ref = g->find_item_by_title(ex.title);
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

TrainResult train(model::ModelParams params, const std::vector<TrainExample>& dataset,
                  const graph::BipartiteGraph& g, const text::Vocab& vocab,
                  const model::ModelConfig& mcfg, const TrainConfig& tcfg) {
  tcfg.validate();
  mcfg.validate();
  if (dataset.empty()) throw Error("train: empty dataset");

  // ---- by-query holdout split ----
  std::vector<std::string> queries;
  {
    std::set<std::string> uniq;
    for (const auto& ex : dataset) uniq.insert(ex.query);
    queries.assign(uniq.begin(), uniq.end());
  }
  std::mt19937_64 split_rng(tcfg.seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
  shuffle_in_place(queries, split_rng);
  std::size_t n_hold = static_cast<std::size_t>(
      tcfg.holdout_fraction * static_cast<double>(queries.size()));
  std::unordered_set<std::string> holdout_queries(queries.begin(),
                                                  queries.begin() + static_cast<long>(n_hold));

  std::vector<std::size_t> train_idx, hold_idx;
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    (holdout_queries.count(dataset[k].query) ? hold_idx : train_idx).push_back(k);
  }
  if (train_idx.empty()) throw Error("train: holdout split left no training examples");

  // ---- precompute encodings (graph is immutable, contexts do not change) ----
  std::vector<model::EncodedExample> encoded(dataset.size());
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    const auto& ex = dataset[k];
    encoded[k] = model::make_example(vocab, mcfg, &g, ex.query, ex.title, ex.query_ref,
                                     ex.item_ref, tcfg.exclude_focus_edge);
  }

  // ---- Adam state over the trainable tensors ----
  const bool with_emb = tcfg.finetune_embeddings;
  auto views = model::tensor_views(params, with_emb);
  AdamState adam;
  adam.m.resize(views.size());
  adam.v.resize(views.size());
  for (std::size_t t = 0; t < views.size(); ++t) {
    adam.m[t].assign(views[t].size(), 0.0);
    adam.v[t].assign(views[t].size(), 0.0);
  }

  auto run_shard = [&](std::size_t lo, std::size_t hi, const std::vector<std::size_t>& order,
                       model::ModelGrads& sum, double& loss_sum) {
    for (std::size_t k = lo; k < hi; ++k) {
      const auto idx = order[k];
      auto fwd = model::forward(encoded[idx], params, mcfg);
      double loss = model::bce_loss(fwd.score, dataset[idx].label);
      loss_sum += loss;
      auto grads = model::backward(fwd.trace, dataset[idx].label, params, mcfg, with_emb);
      model::accumulate(sum, grads);
    }
  };

  TrainResult result;
  std::vector<std::size_t> order = train_idx;
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    std::mt19937_64 epoch_rng(tcfg.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch));
    shuffle_in_place(order, epoch_rng);

    double epoch_loss = 0.0;
    std::size_t batch_start = 0;
    std::size_t batch_no = 0;
    while (batch_start < order.size()) {
      std::size_t batch_end = std::min(batch_start + static_cast<std::size_t>(tcfg.batch_size),
                                       order.size());
      const std::size_t n = batch_end - batch_start;
      ++batch_no;

      model::ModelGrads total = model::zero_grads(mcfg, params, with_emb);
      double batch_loss = 0.0;
      if (tcfg.threads == 1) {
        run_shard(batch_start, batch_end, order, total, batch_loss);
      } else {
        const std::size_t shards = std::min<std::size_t>(static_cast<std::size_t>(tcfg.threads), n);
        std::vector<model::ModelGrads> partial;
        std::vector<double> losses(shards, 0.0);
        partial.reserve(shards);
        for (std::size_t s = 0; s < shards; ++s) {
          partial.push_back(model::zero_grads(mcfg, params, with_emb));
        }
        std::vector<std::thread> pool;
        for (std::size_t s = 0; s < shards; ++s) {
          std::size_t lo = batch_start + s * n / shards;
          std::size_t hi = batch_start + (s + 1) * n / shards;
          pool.emplace_back([&, lo, hi, s] { run_shard(lo, hi, order, partial[s], losses[s]); });
        }
        for (auto& th : pool) th.join();
        for (std::size_t s = 0; s < shards; ++s) {  // fixed-order reduction
          model::accumulate(total, partial[s]);
          batch_loss += losses[s];
        }
      }

      if (!std::isfinite(batch_loss)) {
        throw Error("train: non-finite loss in epoch " + std::to_string(epoch) + " batch " +
                    std::to_string(batch_no));
      }
      epoch_loss += batch_loss;
      model::scale(total, 1.0 / static_cast<double>(n));

      // Adam step
      ++adam.t;
      const double bc1 = 1.0 - std::pow(tcfg.beta1, static_cast<double>(adam.t));
      const double bc2 = 1.0 - std::pow(tcfg.beta2, static_cast<double>(adam.t));
      auto grad_views = model::tensor_views(total, with_emb);
      for (std::size_t t = 0; t < views.size(); ++t) {
        double* p = views[t].data;
        const double* gr = grad_views[t].data;
        auto& m = adam.m[t];
        auto& v = adam.v[t];
        for (std::size_t k = 0; k < views[t].size(); ++k) {
          m[k] = tcfg.beta1 * m[k] + (1.0 - tcfg.beta1) * gr[k];
          v[k] = tcfg.beta2 * v[k] + (1.0 - tcfg.beta2) * gr[k] * gr[k];
          double mhat = m[k] / bc1;
          double vhat = v[k] / bc2;
          p[k] -= tcfg.learning_rate * mhat / (std::sqrt(vhat) + tcfg.adam_eps);
        }
      }
      batch_start = batch_end;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = order.empty() ? 0.0 : epoch_loss / static_cast<double>(order.size());

    if (!hold_idx.empty()) {
      std::vector<eval::ScoredExample> scored;
      scored.reserve(hold_idx.size());
      for (auto idx : hold_idx) {
        auto fwd = model::forward(encoded[idx], params, mcfg);
        scored.push_back({fwd.score, dataset[idx].label});
      }
      try {
        stats.holdout_auc = eval::auc(scored);
        stats.holdout_auc_defined = true;
      } catch (const Error&) {
        stats.holdout_auc = 0.0;
        stats.holdout_auc_defined = false;
      }
      if (epoch == tcfg.epochs) result.holdout_scores = std::move(scored);
    }
    result.history.push_back(stats);
  }

  // Final holdout scores (also covers epochs == 0).
  if (result.holdout_scores.empty() && !hold_idx.empty()) {
    for (auto idx : hold_idx) {
      auto fwd = model::forward(encoded[idx], params, mcfg);
      result.holdout_scores.push_back({fwd.score, dataset[idx].label});
    }
  }
  result.holdout_indices = std::move(hold_idx);
  result.params = std::move(params);
  return result;
}

std::string history_to_jsonl(std::span<const EpochStats> history) {
  std::string out;
  for (const auto& h : history) {
    nlohmann::json j;
    j["epoch"] = h.epoch;
    j["mean_loss"] = h.mean_loss;
    if (h.holdout_auc_defined) {
      j["holdout_auc"] = h.holdout_auc;
    } else {
      j["holdout_auc"] = nullptr;
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_history_jsonl(std::span<const EpochStats> history, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("history: cannot open for write: " + path);
  f << history_to_jsonl(history);
  if (!f) throw Error("history: write failed: " + path);
}

}  // namespace hg4sm::train
