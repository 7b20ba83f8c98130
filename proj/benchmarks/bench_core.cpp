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

#include <benchmark/benchmark.h>

#include <random>
#include <set>

#include "hg4sm/embedding.hpp"
#include "hg4sm/eval.hpp"
#include "hg4sm/graph.hpp"
#include "hg4sm/model.hpp"
#include "hg4sm/synth.hpp"
#include "hg4sm/textproc.hpp"
#include "hg4sm/trainer.hpp"

using namespace hg4sm;

namespace {

// Shared desk-scale world, built once.
struct BenchWorld {
  synth::SynthOutput data;
  text::Vocab vocab;
  embed::EmbeddingTable table;
  graph::BipartiteGraph refined;
  model::ModelConfig mcfg;
  model::ModelParams params;
  std::vector<model::EncodedExample> examples;

  BenchWorld() {
    synth::SynthConfig scfg;
    scfg.n_categories = 10;
    scfg.queries_per_category = 30;
    scfg.items_per_category = 30;
    scfg.noise_click_rate = 0.1;
    scfg.gap_fraction = 0.2;
    scfg.seed = 5;
    data = synth::generate(scfg);

    std::vector<std::string> corpus;
    std::set<std::string> seen;
    for (const auto& rec : data.log) {
      if (seen.insert(rec.query).second) corpus.push_back(rec.query);
      if (seen.insert(rec.title).second) corpus.push_back(rec.title);
    }
    text::VocabBuilder vb;
    for (const auto& s : corpus) vb.add(s);
    vocab = vb.finish(1, 100000);

    embed::SkipgramConfig ecfg;
    ecfg.dim = 32;
    ecfg.epochs = 3;
    auto ids = embed::id_corpus(vocab, corpus);
    table = embed::train_skipgram(ids, vocab, ecfg);

    auto g = graph::build_behavior_graph(data.log);
    refined = graph::refine_with_teacher(g, graph::LexicalTeacher{}, 0.35, 0.8);

    mcfg.d = 32;
    mcfg.l_q = 8;
    mcfg.l_i = 20;
    mcfg.h1 = 256;
    mcfg.h2 = 64;
    params = model::init_params(mcfg, table, 1);

    auto dataset = train::make_training_set(refined, 1, 3);
    for (std::size_t k = 0; k < 256 && k < dataset.size(); ++k) {
      const auto& ex = dataset[k];
      examples.push_back(model::make_example(vocab, mcfg, &refined, ex.query, ex.title,
                                             ex.query_ref, ex.item_ref, true));
    }
  }
};

BenchWorld& world() {
  static BenchWorld w;
  return w;
}

}  // namespace

static void BM_Tokenize(benchmark::State& state) {
  const std::string text = "iPhone11 手机壳 256GB 红色长裙 mac pro １２３ internal-battery";
  for (auto _ : state) {
    auto toks = text::tokenize(text);
    benchmark::DoNotOptimize(toks);
  }
}
BENCHMARK(BM_Tokenize);

static void BM_Encode(benchmark::State& state) {
  auto& w = world();
  const std::string& title = w.data.log.front().title;
  for (auto _ : state) {
    auto enc = w.vocab.encode(title, 20);
    benchmark::DoNotOptimize(enc);
  }
}
BENCHMARK(BM_Encode);

static void BM_MetapathExtraction(benchmark::State& state) {
  auto& w = world();
  graph::NodeRef q{graph::NodeKind::Query, 0};
  graph::NodeRef i{graph::NodeKind::Item, 0};
  for (auto _ : state) {
    auto ctx = graph::extract_metapath_context(w.refined, q, i, true);
    benchmark::DoNotOptimize(ctx);
  }
}
BENCHMARK(BM_MetapathExtraction);

static void BM_Forward(benchmark::State& state) {
  auto& w = world();
  std::size_t k = 0;
  for (auto _ : state) {
    auto r = model::forward(w.examples[k % w.examples.size()], w.params, w.mcfg);
    benchmark::DoNotOptimize(r.score);
    ++k;
  }
}
BENCHMARK(BM_Forward);

static void BM_ForwardBackward(benchmark::State& state) {
  auto& w = world();
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& ex = w.examples[k % w.examples.size()];
    auto r = model::forward(ex, w.params, w.mcfg);
    auto g = model::backward(r.trace, 1.0, w.params, w.mcfg, false);
    benchmark::DoNotOptimize(g.b3);
    ++k;
  }
}
BENCHMARK(BM_ForwardBackward);

static void BM_Auc(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::vector<eval::ScoredExample> ex;
  for (int k = 0; k < 10000; ++k) {
    ex.push_back({static_cast<double>(rng() % 1000) / 1000.0, static_cast<int>(rng() % 2)});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::auc(ex));
  }
}
BENCHMARK(BM_Auc);

static void BM_SkipgramEpoch(benchmark::State& state) {
  auto& w = world();
  std::vector<std::string> corpus;
  std::set<std::string> seen;
  for (const auto& rec : w.data.log) {
    if (seen.insert(rec.title).second) corpus.push_back(rec.title);
  }
  auto ids = embed::id_corpus(w.vocab, corpus);
  embed::SkipgramConfig cfg;
  cfg.dim = 32;
  cfg.epochs = 1;
  for (auto _ : state) {
    auto table = embed::train_skipgram(ids, w.vocab, cfg);
    benchmark::DoNotOptimize(table);
  }
}
BENCHMARK(BM_SkipgramEpoch);

BENCHMARK_MAIN();
