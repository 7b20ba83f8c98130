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

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "hg4sm/embedding.hpp"
#include "hg4sm/error.hpp"
#include "hg4sm/graph.hpp"
#include "hg4sm/synth.hpp"
#include "hg4sm/trainer.hpp"
#include "test_util.hpp"

using namespace hg4sm;
using namespace hg4sm::train;

namespace {

// Small synth world shared by the heavier trainer tests: vocab, embeddings,
// refined graph, dataset.
struct World {
  text::Vocab vocab;
  embed::EmbeddingTable table;
  graph::BipartiteGraph refined;
  std::vector<TrainExample> dataset;
  model::ModelConfig mcfg;
};

World make_world(double gap_fraction, std::uint64_t seed, int dataset_seed = 7) {
  synth::SynthConfig scfg;
  scfg.n_categories = 4;
  scfg.queries_per_category = 10;
  scfg.items_per_category = 12;
  scfg.vocab_per_category = 10;
  scfg.synonym_vocab_per_category = 6;
  scfg.noise_click_rate = 0.1;
  scfg.gap_fraction = gap_fraction;
  scfg.seed = seed;
  auto out = synth::generate(scfg);

  World w;
  text::VocabBuilder vb;
  std::set<std::string> seen;
  std::vector<std::string> corpus;
  for (const auto& rec : out.log) {
    if (seen.insert(rec.query).second) corpus.push_back(rec.query);
    if (seen.insert(rec.title).second) corpus.push_back(rec.title);
  }
  for (const auto& s : corpus) vb.add(s);
  w.vocab = vb.finish(1, 4000);

  embed::SkipgramConfig ecfg;
  ecfg.dim = 8;
  ecfg.window = 4;
  ecfg.epochs = 30;
  ecfg.learning_rate = 0.08;
  ecfg.seed = 11;
  w.table = embed::train_skipgram(embed::id_corpus(w.vocab, corpus), w.vocab, ecfg);

  auto g = graph::build_behavior_graph(out.log);
  w.refined = graph::refine_with_teacher(g, graph::LexicalTeacher{}, 0.35, 0.8);
  w.dataset = make_training_set(w.refined, 1, static_cast<std::uint64_t>(dataset_seed));

  w.mcfg.d = 8;
  w.mcfg.l_q = 4;
  w.mcfg.l_i = 8;
  w.mcfg.h1 = 16;
  w.mcfg.h2 = 8;
  return w;
}

}  // namespace

TEST_CASE("make_training_set: counting, non-edges, determinism") {
  std::vector<graph::LogRecord> log = {
      {"q0", "i0", "t0", 1, 0, 0}, {"q0", "i1", "t1", 2, 0, 0},
      {"q1", "i2", "t2", 1, 1, 0}, {"q1", "i3", "t3", 3, 0, 0},
  };
  auto g = graph::build_behavior_graph(log);
  auto r = graph::refine_with_teacher(g, graph::LexicalTeacher{}, 0.0, 1.0);

  SUBCASE("positives + ratio negatives") {
    auto ds = make_training_set(r, 1, 5);
    std::size_t pos = 0, neg = 0;
    for (const auto& ex : ds) (ex.label == 1 ? pos : neg) += 1;
    CHECK(pos == 4);
    CHECK(neg == 4);
  }
  SUBCASE("sampled negatives are never existing edges") {
    auto ds = make_training_set(r, 3, 5);
    for (const auto& ex : ds) {
      if (ex.source != ExampleSource::SampledNegative) continue;
      REQUIRE(ex.query_ref.has_value());
      REQUIRE(ex.item_ref.has_value());
      CHECK(r.find_edge(ex.query_ref->id, ex.item_ref->id) == nullptr);
    }
  }
  SUBCASE("same seed, same stream") {
    auto a = make_training_set(r, 2, 9);
    auto b = make_training_set(r, 2, 9);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].query == b[k].query);
      CHECK(a[k].title == b[k].title);
      CHECK(a[k].label == b[k].label);
    }
  }
  SUBCASE("popularity weighting prefers heavily clicked items") {
    // q_neg's negatives come from {hot, cold...}; hot has 200 clicks.
    std::vector<graph::LogRecord> skew = {
        {"q_pop", "hot", "hot title", 200, 0, 0},
        {"q_pop", "cold0", "cold title 0", 1, 0, 0},
        {"q_pop", "cold1", "cold title 1", 1, 0, 0},
        {"q_pop", "cold2", "cold title 2", 1, 0, 0},
        {"q_neg", "own", "own title", 1, 0, 0},
    };
    auto g2 = graph::build_behavior_graph(skew);
    auto r2 = graph::refine_with_teacher(g2, graph::LexicalTeacher{}, 0.0, 1.0);
    auto count_hot = [&](NegativeSampling mode) {
      auto ds = make_training_set(r2, 40, 3, mode);
      std::size_t hot = 0, total = 0;
      for (const auto& ex : ds) {
        if (ex.source != ExampleSource::SampledNegative) continue;
        if (ex.query != "q_neg") continue;
        ++total;
        if (ex.title == "hot title") ++hot;
      }
      REQUIRE(total == 40);
      return hot;
    };
    std::size_t uniform_hot = count_hot(NegativeSampling::Uniform);
    std::size_t popular_hot = count_hot(NegativeSampling::Popularity);
    CHECK(popular_hot > uniform_hot);
    CHECK(popular_hot >= 35);  // hot carries ~98% of the weight

    CHECK(parse_negative_sampling("uniform") == NegativeSampling::Uniform);
    CHECK(parse_negative_sampling("popularity") == NegativeSampling::Popularity);
    CHECK_THROWS_AS(parse_negative_sampling("zipf"), Error);
  }
  SUBCASE("edgeless graph rejected") {
    std::vector<graph::LogRecord> only_imp = {{"q", "i", "t", 0, 0, 1}};
    auto g2 = graph::build_behavior_graph(only_imp);
    auto r2 = graph::refine_with_teacher(g2, graph::LexicalTeacher{}, 0.0, 1.0);
    CHECK_THROWS_WITH_AS(make_training_set(r2, 1, 1), "no positives", Error);
  }
}

TEST_CASE("train: learning rate zero leaves parameters untouched") {
  auto w = make_world(0.0, 3);
  auto params = model::init_params(w.mcfg, w.table, 1);
  auto before = params;
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.learning_rate = 0.0;
  tcfg.seed = 1;
  auto res = train::train(std::move(params), w.dataset, w.refined, w.vocab, w.mcfg, tcfg);
  CHECK(res.params == before);
  CHECK(res.history.size() == 2);
}

TEST_CASE("train: deterministic history, loss decreases, holdout AUC learns") {
  auto w = make_world(0.0, 3);
  TrainConfig tcfg;
  tcfg.epochs = 8;
  tcfg.batch_size = 16;
  tcfg.learning_rate = 3e-3;
  tcfg.seed = 21;

  auto run = [&] {
    auto params = model::init_params(w.mcfg, w.table, 21);
    return train::train(std::move(params), w.dataset, w.refined, w.vocab, w.mcfg, tcfg);
  };
  auto r1 = run();
  auto r2 = run();

  // bitwise-identical history in single-threaded mode
  CHECK(history_to_jsonl(r1.history) == history_to_jsonl(r2.history));

  CHECK(r1.history.back().mean_loss < r1.history.front().mean_loss);
  REQUIRE(r1.history.back().holdout_auc_defined);
  double best_auc = 0.0;
  for (const auto& h : r1.history) best_auc = std::max(best_auc, h.holdout_auc);
  CHECK(best_auc >= 0.9);  // separable synthetic data, reached within the run
}

TEST_CASE("train: frozen embedding table is bitwise unchanged") {
  auto w = make_world(0.0, 4);
  auto params = model::init_params(w.mcfg, w.table, 2);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.seed = 5;
  tcfg.finetune_embeddings = false;
  auto res = train::train(std::move(params), w.dataset, w.refined, w.vocab, w.mcfg, tcfg);
  CHECK(res.params.word_emb == w.table.matrix());

  SUBCASE("finetune flag unlocks the table") {
    auto params2 = model::init_params(w.mcfg, w.table, 2);
    tcfg.finetune_embeddings = true;
    auto res2 = train::train(std::move(params2), w.dataset, w.refined, w.vocab, w.mcfg, tcfg);
    CHECK(res2.params.word_emb != w.table.matrix());
    // PAD row still pinned at zero
    for (std::size_t j = 0; j < res2.params.word_emb.cols(); ++j) {
      CHECK(res2.params.word_emb.at(text::kPadId, j) == 0.0);
    }
  }
}

TEST_CASE("train: by-query split has no (query,item) overlap") {
  auto w = make_world(0.2, 5);
  auto params = model::init_params(w.mcfg, w.table, 3);
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.seed = 13;
  auto res = train::train(std::move(params), w.dataset, w.refined, w.vocab, w.mcfg, tcfg);

  REQUIRE(!res.holdout_indices.empty());
  std::unordered_set<std::string> holdout_queries;
  std::unordered_set<std::size_t> holdout_set(res.holdout_indices.begin(),
                                              res.holdout_indices.end());
  for (auto idx : res.holdout_indices) holdout_queries.insert(w.dataset[idx].query);
  for (std::size_t k = 0; k < w.dataset.size(); ++k) {
    if (holdout_set.count(k)) continue;
    CHECK(holdout_queries.count(w.dataset[k].query) == 0);
  }
}

TEST_CASE("train: threaded shards agree with single-threaded on the result quality") {
  auto w = make_world(0.0, 6);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.seed = 9;
  auto p1 = model::init_params(w.mcfg, w.table, 9);
  auto r1 = train::train(std::move(p1), w.dataset, w.refined, w.vocab, w.mcfg, tcfg);
  tcfg.threads = 3;
  auto p2 = model::init_params(w.mcfg, w.table, 9);
  auto r2 = train::train(std::move(p2), w.dataset, w.refined, w.vocab, w.mcfg, tcfg);
  REQUIRE(r1.history.size() == r2.history.size());
  // shard reduction may reorder float sums; results agree to tolerance
  CHECK(r1.history.back().mean_loss ==
        doctest::Approx(r2.history.back().mean_loss).epsilon(1e-9));
}

TEST_CASE("train: checkpoint round trip reproduces holdout scores") {
  auto w = make_world(0.0, 8);
  TrainConfig tcfg;
  tcfg.epochs = 2;
  tcfg.seed = 4;
  auto params = model::init_params(w.mcfg, w.table, 4);
  auto res = train::train(std::move(params), w.dataset, w.refined, w.vocab, w.mcfg, tcfg);

  std::string path = temp_file_path("trainer_ckpt.txt");
  model::save_checkpoint(res.params, w.mcfg, path);
  auto ck = model::load_checkpoint(path);

  for (std::size_t k = 0; k < res.holdout_indices.size(); ++k) {
    const auto& ex = w.dataset[res.holdout_indices[k]];
    auto enc = model::make_example(w.vocab, w.mcfg, &w.refined, ex.query, ex.title,
                                   ex.query_ref, ex.item_ref, tcfg.exclude_focus_edge);
    double score = model::forward(enc, ck.params, ck.config).score;
    CHECK(std::abs(score - res.holdout_scores[k].score) < 1e-6);
  }
  std::remove(path.c_str());

  SUBCASE("vocab size mismatch is detectable") {
    CHECK(ck.params.word_emb.rows() == w.vocab.size());
  }
}

TEST_CASE("train: non-finite loss aborts with batch diagnostic") {
  auto w = make_world(0.0, 10);
  auto params = model::init_params(w.mcfg, w.table, 1);
  // poison one weight so the first forward pass overflows
  params.b3 = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tcfg;
  tcfg.epochs = 1;
  CHECK_THROWS_WITH_AS(
      train::train(std::move(params), w.dataset, w.refined, w.vocab, w.mcfg, tcfg),
      doctest::Contains("non-finite loss"), Error);
}

TEST_CASE("dataset file: round trip with node re-resolution") {
  auto w = make_world(0.0, 12);
  std::string path = temp_file_path("dataset_roundtrip.tsv");
  save_dataset(w.dataset, path);
  auto loaded = load_dataset(path, &w.refined);
  REQUIRE(loaded.size() == w.dataset.size());
  for (std::size_t k = 0; k < loaded.size(); ++k) {
    CHECK(loaded[k].query == w.dataset[k].query);
    CHECK(loaded[k].title == w.dataset[k].title);
    CHECK(loaded[k].label == w.dataset[k].label);
    CHECK(loaded[k].source == w.dataset[k].source);
    REQUIRE(loaded[k].query_ref.has_value());
    CHECK(loaded[k].query_ref->id == w.dataset[k].query_ref->id);
    REQUIRE(loaded[k].item_ref.has_value());
    CHECK(loaded[k].item_ref->id == w.dataset[k].item_ref->id);
  }
  std::remove(path.c_str());
}

TEST_CASE("labeled examples: explicit source parses and resolves") {
  auto w = make_world(0.0, 13);
  std::string path = temp_file_path("labeled.tsv");
  {
    std::ofstream f(path, std::ios::binary);
    f << w.dataset[0].query << '\t' << w.dataset[0].title << "\t1\n";
    f << "unknown query\tunknown title\t0\n";
  }
  auto exs = load_labeled_examples(path, &w.refined);
  REQUIRE(exs.size() == 2);
  CHECK(exs[0].source == ExampleSource::Explicit);
  CHECK(exs[0].query_ref.has_value());
  CHECK(!exs[1].query_ref.has_value());  // cold pair still usable (padded context)

  std::ofstream(path, std::ios::binary) << "too\tfew\n";
  CHECK_THROWS_WITH_AS(load_labeled_examples(path, nullptr), doctest::Contains("line 1"),
                       Error);
  std::remove(path.c_str());
}
