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

// Batch pipeline driver: synth-gen -> build-vocab -> train-embeddings ->
// build-graph -> refine-graph -> make-dataset -> train -> eval / predict /
// ablate. Every artifact-producing command drops a .manifest.json with input
// hashes and the resolved configuration.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hg4sm/ablation.hpp"
#include "hg4sm/embedding.hpp"
#include "hg4sm/error.hpp"
#include "hg4sm/eval.hpp"
#include "hg4sm/graph.hpp"
#include "hg4sm/model.hpp"
#include "hg4sm/synth.hpp"
#include "hg4sm/textproc.hpp"
#include "hg4sm/trainer.hpp"
#include "file_config.hpp"
#include "manifest.hpp"

namespace {

using namespace hg4sm;

std::string g_config_path;  // one subcommand parses per process

void attach_config(CLI::App* sub) {
  sub->add_option("--config", g_config_path,
                  "flat key=value config file; flags override file values");
}

cli::FileConfig load_file_config() {
  return g_config_path.empty() ? cli::FileConfig{} : cli::FileConfig::load(g_config_path);
}

std::string g_cjk_ranges;  // empty -> built-in CJK blocks

void attach_cjk_ranges(CLI::App* sub) {
  sub->add_option("--cjk-ranges", g_cjk_ranges,
                  "treat-as-cjk codepoint ranges, e.g. 4E00-9FFF,3400-4DBF");
}

text::TokenizerConfig tokenizer_config(const cli::FileConfig& fc, const CLI::App* sub) {
  fc.apply(sub, "--cjk-ranges", g_cjk_ranges);
  return text::TokenizerConfig{text::parse_codepoint_ranges(g_cjk_ranges)};
}

text::Vocab load_vocab(const std::string& path, const text::TokenizerConfig& tok_cfg) {
  auto vocab = text::Vocab::load(path);
  vocab.set_tokenizer_config(tok_cfg);
  return vocab;
}

std::vector<graph::LogRecord> read_log(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open log file: " + path);
  return graph::parse_log_jsonl(f);
}

// Distinct query texts and/or titles, in first-appearance order.
std::vector<std::string> corpus_texts(const std::vector<graph::LogRecord>& log,
                                      const std::string& which) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  bool queries = which == "queries" || which == "both";
  bool titles = which == "titles" || which == "both";
  if (!queries && !titles) throw Error("corpus must be one of queries|titles|both");
  for (const auto& rec : log) {
    if (queries && seen.insert(rec.query).second) out.push_back(rec.query);
    if (titles && seen.insert(rec.title).second) out.push_back(rec.title);
  }
  return out;
}

struct ModelFlags {
  int d = 32;
  int l_q = 8;
  int l_i = 20;
  int h1 = 256;
  int h2 = 64;
  std::string components = "rep,int,hin";
  std::string activation = "tanh";

  void attach(CLI::App* sub) {
    sub->add_option("--d", d, "word embedding dimension");
    sub->add_option("--l-q", l_q, "fixed query length");
    sub->add_option("--l-i", l_i, "fixed title length");
    sub->add_option("--h1", h1, "first fusion layer width");
    sub->add_option("--h2", h2, "second fusion layer width");
    sub->add_option("--components", components, "enabled blocks, e.g. rep,int,hin");
    sub->add_option("--activation", activation, "tanh|relu|identity");
  }
  void apply_config(const cli::FileConfig& fc, const CLI::App* sub) {
    fc.apply(sub, "--d", d);
    fc.apply(sub, "--l-q", l_q);
    fc.apply(sub, "--l-i", l_i);
    fc.apply(sub, "--h1", h1);
    fc.apply(sub, "--h2", h2);
    fc.apply(sub, "--components", components);
    fc.apply(sub, "--activation", activation);
  }
  model::ModelConfig to_config() const {
    model::ModelConfig cfg;
    cfg.d = d;
    cfg.l_q = l_q;
    cfg.l_i = l_i;
    cfg.h1 = h1;
    cfg.h2 = h2;
    cfg.components = model::parse_components(components);
    cfg.activation = model::parse_activation(activation);
    return cfg;
  }
  nlohmann::json to_json() const {
    return {{"d", d},   {"l_q", l_q},                {"l_i", l_i}, {"h1", h1},
            {"h2", h2}, {"components", components},  {"activation", activation}};
  }
};

struct TrainFlags {
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-3;
  double holdout = 0.2;
  bool include_focus_edge = false;
  bool finetune_embeddings = false;
  int threads = 1;

  void attach(CLI::App* sub) {
    sub->add_option("--epochs", epochs, "training epochs");
    sub->add_option("--batch-size", batch_size, "mini-batch size");
    sub->add_option("--lr", lr, "Adam learning rate");
    sub->add_option("--holdout", holdout, "held-out fraction of queries");
    sub->add_flag("--include-focus-edge", include_focus_edge,
                  "keep the focus pair's own edge visible during training");
    sub->add_flag("--finetune-embeddings", finetune_embeddings,
                  "unlock the word-embedding table during training");
    sub->add_option("--threads", threads, "gradient shards per batch");
  }
  void apply_config(const cli::FileConfig& fc, const CLI::App* sub) {
    fc.apply(sub, "--epochs", epochs);
    fc.apply(sub, "--batch-size", batch_size);
    fc.apply(sub, "--lr", lr);
    fc.apply(sub, "--holdout", holdout);
    fc.apply(sub, "--include-focus-edge", include_focus_edge);
    fc.apply(sub, "--finetune-embeddings", finetune_embeddings);
    fc.apply(sub, "--threads", threads);
  }
  train::TrainConfig to_config(std::uint64_t seed) const {
    train::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.learning_rate = lr;
    cfg.holdout_fraction = holdout;
    cfg.exclude_focus_edge = !include_focus_edge;
    cfg.finetune_embeddings = finetune_embeddings;
    cfg.threads = threads;
    cfg.seed = seed;
    return cfg;
  }
  nlohmann::json to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"lr", lr},
            {"holdout", holdout},
            {"include_focus_edge", include_focus_edge},
            {"finetune_embeddings", finetune_embeddings},
            {"threads", threads}};
  }
};

// Scores (query, item_id, label) rows against a trained model; items resolve
// through the graph, unknown queries fall back to cold-start encoding.
std::vector<eval::ScoredExample> score_truth_pairs(
    const std::vector<synth::TruthPair>& pairs, const model::Checkpoint& ck,
    const text::Vocab& vocab, const graph::BipartiteGraph& g) {
  std::vector<eval::ScoredExample> scored;
  scored.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto item = g.find_item(p.item_id);
    if (!item) throw Error("eval: item_id '" + p.item_id + "' not present in the graph");
    auto query = g.find_query(p.query);
    auto ex = model::make_example(vocab, ck.config, &g, p.query, g.item_title(item->id), query,
                                  item, /*exclude_focus_edge=*/false);
    scored.push_back({model::forward(ex, ck.params, ck.config).score, p.label});
  }
  return scored;
}

model::Checkpoint load_checkpoint_for(const text::Vocab& vocab, const std::string& path) {
  auto ck = model::load_checkpoint(path);
  if (ck.params.word_emb.rows() != vocab.size()) {
    throw Error("checkpoint vocab size " + std::to_string(ck.params.word_emb.rows()) +
                " does not match vocab file size " + std::to_string(vocab.size()));
  }
  return ck;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(csv);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) seeds.push_back(std::stoull(part));
  }
  if (seeds.empty()) throw Error("empty seed list");
  return seeds;
}

std::vector<model::ComponentSet> parse_subset_list(const std::string& spec) {
  if (spec == "grid") return eval::ablation_grid();
  std::vector<model::ComponentSet> subsets;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (!part.empty()) subsets.push_back(model::parse_components(part));
  }
  if (subsets.empty()) throw Error("empty subset list");
  return subsets;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"query-item semantic relevance pipeline (bipartite behavior graph + "
               "first/second-order matching model)"};
  app.require_subcommand(1);

  // ---- synth-gen ----
  auto* synth_cmd = app.add_subcommand("synth-gen", "generate a synthetic search log");
  attach_config(synth_cmd);
  synth::SynthConfig scfg;
  std::string synth_out, truth_out;
  std::uint64_t synth_seed = 1;
  synth_cmd->add_option("--out", synth_out, "output log (JSON lines)")->required();
  synth_cmd->add_option("--truth-out", truth_out, "output ground-truth TSV")->required();
  synth_cmd->add_option("--categories", scfg.n_categories, "");
  synth_cmd->add_option("--queries-per-category", scfg.queries_per_category, "");
  synth_cmd->add_option("--items-per-category", scfg.items_per_category, "");
  synth_cmd->add_option("--vocab-per-category", scfg.vocab_per_category, "");
  synth_cmd->add_option("--synonym-vocab-per-category", scfg.synonym_vocab_per_category, "");
  synth_cmd->add_option("--noise-rate", scfg.noise_click_rate, "");
  synth_cmd->add_option("--purchase-rate", scfg.purchase_rate, "");
  synth_cmd->add_option("--impression-rate", scfg.impression_rate, "");
  synth_cmd->add_option("--gap-fraction", scfg.gap_fraction, "");
  synth_cmd->add_option("--eval-pos", scfg.eval_pos_per_query, "");
  synth_cmd->add_option("--eval-neg", scfg.eval_neg_per_query, "");
  synth_cmd->add_option("--seed", synth_seed, "");

  // ---- build-vocab ----
  auto* vocab_cmd = app.add_subcommand("build-vocab", "count tokens and build the vocabulary");
  attach_config(vocab_cmd);
  attach_cjk_ranges(vocab_cmd);
  std::string vocab_log, vocab_out, vocab_corpus = "both";
  int min_count = 1, max_size = 200000;
  vocab_cmd->add_option("--log", vocab_log, "input log (JSON lines)")->required();
  vocab_cmd->add_option("--out", vocab_out, "output vocab file")->required();
  vocab_cmd->add_option("--min-count", min_count, "");
  vocab_cmd->add_option("--max-size", max_size, "");
  vocab_cmd->add_option("--corpus", vocab_corpus, "queries|titles|both");

  // ---- train-embeddings ----
  auto* emb_cmd = app.add_subcommand("train-embeddings", "skip-gram word vectors");
  attach_config(emb_cmd);
  attach_cjk_ranges(emb_cmd);
  std::string emb_log, emb_vocab, emb_out, emb_corpus = "both";
  embed::SkipgramConfig ecfg;
  emb_cmd->add_option("--log", emb_log, "input log (JSON lines)")->required();
  emb_cmd->add_option("--vocab", emb_vocab, "vocab file")->required();
  emb_cmd->add_option("--out", emb_out, "output embedding file")->required();
  emb_cmd->add_option("--emb-dim", ecfg.dim, "");
  emb_cmd->add_option("--emb-window", ecfg.window, "");
  emb_cmd->add_option("--emb-negatives", ecfg.negatives, "");
  emb_cmd->add_option("--emb-epochs", ecfg.epochs, "");
  emb_cmd->add_option("--emb-lr", ecfg.learning_rate, "");
  emb_cmd->add_option("--seed", ecfg.seed, "");
  emb_cmd->add_option("--corpus", emb_corpus, "queries|titles|both");

  // ---- build-graph ----
  auto* graph_cmd = app.add_subcommand("build-graph", "behavior network from the log");
  attach_config(graph_cmd);
  std::string graph_log, graph_out;
  graph_cmd->add_option("--log", graph_log, "input log (JSON lines)")->required();
  graph_cmd->add_option("--out", graph_out, "output graph snapshot")->required();

  // ---- refine-graph ----
  auto* refine_cmd = app.add_subcommand("refine-graph", "teacher-knowledge edge refinement");
  attach_config(refine_cmd);
  attach_cjk_ranges(refine_cmd);
  std::string refine_in, refine_out, teacher_cache_path;
  double alpha = 0.35, beta = 0.8;
  std::size_t candidate_cap = graph::kDefaultCandidateCapPerQuery;
  refine_cmd->add_option("--graph", refine_in, "input graph snapshot")->required();
  refine_cmd->add_option("--out", refine_out, "output refined snapshot")->required();
  refine_cmd->add_option("--alpha", alpha, "click-edge retention threshold");
  refine_cmd->add_option("--beta", beta, "edge-addition threshold");
  refine_cmd->add_option("--teacher-cache", teacher_cache_path,
                         "TSV query/item_id/score overriding the lexical oracle");
  refine_cmd->add_option("--candidate-cap", candidate_cap, "per-query candidate pool cap");

  // ---- make-dataset ----
  auto* dataset_cmd = app.add_subcommand("make-dataset", "training pairs from the graph");
  attach_config(dataset_cmd);
  std::string dataset_graph, dataset_out, labeled_path;
  int neg_ratio = 1;
  std::uint64_t dataset_seed = 1;
  dataset_cmd->add_option("--graph", dataset_graph, "refined graph snapshot")->required();
  dataset_cmd->add_option("--out", dataset_out, "output dataset file")->required();
  dataset_cmd->add_option("--ratio", neg_ratio, "sampled negatives per positive");
  std::string neg_sampling = "uniform";
  dataset_cmd->add_option("--neg-sampling", neg_sampling, "uniform|popularity");
  dataset_cmd->add_option("--seed", dataset_seed, "");
  dataset_cmd->add_option("--labeled", labeled_path, "optional explicit TSV query/title/label");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train the relevance model");
  attach_config(train_cmd);
  attach_cjk_ranges(train_cmd);
  std::string train_graph, train_vocab, train_emb, train_dataset, train_out, history_out;
  std::uint64_t train_seed = 1;
  ModelFlags model_flags;
  TrainFlags train_flags;
  train_cmd->add_option("--graph", train_graph, "refined graph snapshot")->required();
  train_cmd->add_option("--vocab", train_vocab, "vocab file")->required();
  train_cmd->add_option("--embeddings", train_emb, "embedding file")->required();
  train_cmd->add_option("--dataset", train_dataset, "dataset file")->required();
  train_cmd->add_option("--out", train_out, "output checkpoint")->required();
  train_cmd->add_option("--history", history_out, "output per-epoch history (JSON lines)");
  train_cmd->add_option("--seed", train_seed, "");
  model_flags.attach(train_cmd);
  train_flags.attach(train_cmd);

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "metrics over scores or model predictions");
  attach_config(eval_cmd);
  attach_cjk_ranges(eval_cmd);
  std::string scores_path, eval_ckpt, eval_vocab, eval_graph, eval_pairs, eval_out;
  double threshold = 0.5;
  eval_cmd->add_option("--scores", scores_path, "TSV score<TAB>label");
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint to score with");
  eval_cmd->add_option("--vocab", eval_vocab, "vocab file (model mode)");
  eval_cmd->add_option("--graph", eval_graph, "refined graph snapshot (model mode)");
  eval_cmd->add_option("--pairs", eval_pairs, "TSV query/item_id/label (model mode)");
  eval_cmd->add_option("--threshold", threshold, "classification threshold");
  eval_cmd->add_option("--out", eval_out, "write the JSON report here");

  // ---- predict ----
  auto* predict_cmd = app.add_subcommand("predict", "score query/title pairs from stdin");
  attach_config(predict_cmd);
  attach_cjk_ranges(predict_cmd);
  std::string pred_ckpt, pred_vocab, pred_graph;
  predict_cmd->add_option("--ckpt", pred_ckpt, "checkpoint")->required();
  predict_cmd->add_option("--vocab", pred_vocab, "vocab file")->required();
  predict_cmd->add_option("--graph", pred_graph, "refined graph snapshot")->required();

  // ---- ablate ----
  auto* ablate_cmd = app.add_subcommand("ablate", "component-subset grid runs");
  attach_config(ablate_cmd);
  attach_cjk_ranges(ablate_cmd);
  std::string ab_graph, ab_vocab, ab_emb, ab_dataset, ab_out, ab_json;
  std::string subset_spec = "grid", seed_spec = "1,2,3,4,5";
  double ab_threshold = 0.5;
  ModelFlags ab_model_flags;
  TrainFlags ab_train_flags;
  ablate_cmd->add_option("--graph", ab_graph, "refined graph snapshot")->required();
  ablate_cmd->add_option("--vocab", ab_vocab, "vocab file")->required();
  ablate_cmd->add_option("--embeddings", ab_emb, "embedding file")->required();
  ablate_cmd->add_option("--dataset", ab_dataset, "dataset file")->required();
  ablate_cmd->add_option("--out", ab_out, "output TSV table")->required();
  ablate_cmd->add_option("--json", ab_json, "also write per-run JSON here");
  ablate_cmd->add_option("--subsets", subset_spec,
                         "semicolon-separated component sets, or 'grid'");
  ablate_cmd->add_option("--seeds", seed_spec, "comma-separated seeds");
  ablate_cmd->add_option("--threshold", ab_threshold, "classification threshold");
  ab_model_flags.attach(ablate_cmd);
  ab_train_flags.attach(ablate_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) {
      auto fc = load_file_config();
      fc.apply(synth_cmd, "--categories", scfg.n_categories);
      fc.apply(synth_cmd, "--queries-per-category", scfg.queries_per_category);
      fc.apply(synth_cmd, "--items-per-category", scfg.items_per_category);
      fc.apply(synth_cmd, "--vocab-per-category", scfg.vocab_per_category);
      fc.apply(synth_cmd, "--synonym-vocab-per-category", scfg.synonym_vocab_per_category);
      fc.apply(synth_cmd, "--noise-rate", scfg.noise_click_rate);
      fc.apply(synth_cmd, "--purchase-rate", scfg.purchase_rate);
      fc.apply(synth_cmd, "--impression-rate", scfg.impression_rate);
      fc.apply(synth_cmd, "--gap-fraction", scfg.gap_fraction);
      fc.apply(synth_cmd, "--eval-pos", scfg.eval_pos_per_query);
      fc.apply(synth_cmd, "--eval-neg", scfg.eval_neg_per_query);
      fc.apply(synth_cmd, "--seed", synth_seed);
      scfg.seed = synth_seed;
      auto out = synth::generate(scfg);
      {
        std::ofstream f(synth_out, std::ios::binary);
        if (!f) throw Error("cannot write " + synth_out);
        graph::write_log_jsonl(out.log, f);
      }
      {
        std::ofstream f(truth_out, std::ios::binary);
        if (!f) throw Error("cannot write " + truth_out);
        synth::write_truth_tsv(out.truth, f);
      }
      cli::Manifest m("synth-gen");
      m.set_seed(scfg.seed);
      m.set_config({{"categories", scfg.n_categories},
                    {"queries_per_category", scfg.queries_per_category},
                    {"items_per_category", scfg.items_per_category},
                    {"vocab_per_category", scfg.vocab_per_category},
                    {"synonym_vocab_per_category", scfg.synonym_vocab_per_category},
                    {"noise_rate", scfg.noise_click_rate},
                    {"purchase_rate", scfg.purchase_rate},
                    {"impression_rate", scfg.impression_rate},
                    {"gap_fraction", scfg.gap_fraction},
                    {"eval_pos", scfg.eval_pos_per_query},
                    {"eval_neg", scfg.eval_neg_per_query}});
      m.add_output(synth_out);
      m.add_output(truth_out);
      m.write(synth_out);
      std::printf("wrote %s (%zu records), %s (%zu pairs)\n", synth_out.c_str(),
                  out.log.size(), truth_out.c_str(), out.truth.size());
    } else if (vocab_cmd->parsed()) {
      auto fc = load_file_config();
      fc.apply(vocab_cmd, "--min-count", min_count);
      fc.apply(vocab_cmd, "--max-size", max_size);
      fc.apply(vocab_cmd, "--corpus", vocab_corpus);
      auto log = read_log(vocab_log);
      text::VocabBuilder builder(tokenizer_config(fc, vocab_cmd));
      for (const auto& t : corpus_texts(log, vocab_corpus)) builder.add(t);
      auto vocab = builder.finish(min_count, max_size);
      vocab.save(vocab_out);
      cli::Manifest m("build-vocab");
      m.add_input(vocab_log);
      m.set_config({{"min_count", min_count}, {"max_size", max_size}, {"corpus", vocab_corpus}});
      m.add_output(vocab_out);
      m.write(vocab_out);
      std::printf("wrote %s (%zu entries)\n", vocab_out.c_str(), vocab.size());
    } else if (emb_cmd->parsed()) {
      auto fc = load_file_config();
      fc.apply(emb_cmd, "--emb-dim", ecfg.dim);
      fc.apply(emb_cmd, "--emb-window", ecfg.window);
      fc.apply(emb_cmd, "--emb-negatives", ecfg.negatives);
      fc.apply(emb_cmd, "--emb-epochs", ecfg.epochs);
      fc.apply(emb_cmd, "--emb-lr", ecfg.learning_rate);
      fc.apply(emb_cmd, "--seed", ecfg.seed);
      fc.apply(emb_cmd, "--corpus", emb_corpus);
      auto log = read_log(emb_log);
      auto vocab = load_vocab(emb_vocab, tokenizer_config(fc, emb_cmd));
      auto corpus = embed::id_corpus(vocab, corpus_texts(log, emb_corpus));
      std::vector<double> losses;
      auto table = embed::train_skipgram(corpus, vocab, ecfg, &losses);
      table.save(emb_out, vocab);
      cli::Manifest m("train-embeddings");
      m.add_input(emb_log);
      m.add_input(emb_vocab);
      m.set_seed(ecfg.seed);
      m.set_config({{"emb_dim", ecfg.dim},
                    {"emb_window", ecfg.window},
                    {"emb_negatives", ecfg.negatives},
                    {"emb_epochs", ecfg.epochs},
                    {"emb_lr", ecfg.learning_rate},
                    {"corpus", emb_corpus}});
      m.add_output(emb_out);
      m.write(emb_out);
      std::printf("wrote %s (%zu x %d), final epoch loss %.6f\n", emb_out.c_str(),
                  table.vocab_size(), table.dim(), losses.empty() ? 0.0 : losses.back());
    } else if (graph_cmd->parsed()) {
      auto log = read_log(graph_log);
      auto g = graph::build_behavior_graph(log);
      g.save(graph_out);
      cli::Manifest m("build-graph");
      m.add_input(graph_log);
      m.add_output(graph_out);
      m.write(graph_out);
      std::printf("wrote %s (%zu queries, %zu items, %zu edges, %zu candidates)\n",
                  graph_out.c_str(), g.query_count(), g.item_count(), g.edge_count(),
                  g.candidates().size());
    } else if (refine_cmd->parsed()) {
      auto fc = load_file_config();
      fc.apply(refine_cmd, "--alpha", alpha);
      fc.apply(refine_cmd, "--beta", beta);
      fc.apply(refine_cmd, "--candidate-cap", candidate_cap);
      auto g = graph::BipartiteGraph::load(refine_in);
      graph::LexicalTeacher teacher(tokenizer_config(fc, refine_cmd));
      std::optional<graph::TeacherScoreCache> cache;
      if (!teacher_cache_path.empty()) {
        cache = graph::TeacherScoreCache::load(teacher_cache_path);
      }
      auto refined = graph::refine_with_teacher(g, teacher, alpha, beta,
                                                cache ? &*cache : nullptr, candidate_cap);
      refined.save(refine_out);
      cli::Manifest m("refine-graph");
      m.add_input(refine_in);
      if (!teacher_cache_path.empty()) m.add_input(teacher_cache_path);
      m.set_config({{"alpha", alpha},
                    {"beta", beta},
                    {"candidate_cap", candidate_cap},
                    {"teacher", teacher_cache_path.empty() ? "lexical" : "cache+lexical"}});
      m.add_output(refine_out);
      m.write(refine_out);
      std::printf("wrote %s (%zu edges after refinement)\n", refine_out.c_str(),
                  refined.edge_count());
    } else if (dataset_cmd->parsed()) {
      auto fc = load_file_config();
      fc.apply(dataset_cmd, "--ratio", neg_ratio);
      fc.apply(dataset_cmd, "--seed", dataset_seed);
      fc.apply(dataset_cmd, "--neg-sampling", neg_sampling);
      auto g = graph::BipartiteGraph::load(dataset_graph);
      auto dataset = train::make_training_set(g, neg_ratio, dataset_seed,
                                              train::parse_negative_sampling(neg_sampling));
      if (!labeled_path.empty()) {
        auto explicit_examples = train::load_labeled_examples(labeled_path, &g);
        dataset.insert(dataset.end(), explicit_examples.begin(), explicit_examples.end());
      }
      train::save_dataset(dataset, dataset_out);
      cli::Manifest m("make-dataset");
      m.add_input(dataset_graph);
      if (!labeled_path.empty()) m.add_input(labeled_path);
      m.set_seed(dataset_seed);
      m.set_config({{"ratio", neg_ratio},
                    {"neg_sampling", neg_sampling},
                    {"labeled", labeled_path}});
      m.add_output(dataset_out);
      m.write(dataset_out);
      std::printf("wrote %s (%zu examples)\n", dataset_out.c_str(), dataset.size());
    } else if (train_cmd->parsed()) {
      auto fc = load_file_config();
      fc.apply(train_cmd, "--seed", train_seed);
      model_flags.apply_config(fc, train_cmd);
      train_flags.apply_config(fc, train_cmd);
      auto g = graph::BipartiteGraph::load(train_graph);
      auto vocab = load_vocab(train_vocab, tokenizer_config(fc, train_cmd));
      auto table = embed::EmbeddingTable::load(train_emb, vocab);
      auto dataset = train::load_dataset(train_dataset, &g);
      auto mcfg = model_flags.to_config();
      if (mcfg.d != table.dim()) {
        throw Error("model d=" + std::to_string(mcfg.d) + " but embedding file has dim " +
                    std::to_string(table.dim()));
      }
      auto tcfg = train_flags.to_config(train_seed);
      auto params = model::init_params(mcfg, table, train_seed);
      auto result = train::train(std::move(params), dataset, g, vocab, mcfg, tcfg);
      model::save_checkpoint(result.params, mcfg, train_out);
      if (!history_out.empty()) train::write_history_jsonl(result.history, history_out);

      cli::Manifest m("train");
      m.add_input(train_graph);
      m.add_input(train_vocab);
      m.add_input(train_emb);
      m.add_input(train_dataset);
      m.set_seed(train_seed);
      auto cfg_json = model_flags.to_json();
      cfg_json.update(train_flags.to_json());
      m.set_config(cfg_json);
      m.add_output(train_out);
      if (!history_out.empty()) m.add_output(history_out);
      m.write(train_out);

      const auto& last = result.history.empty() ? train::EpochStats{} : result.history.back();
      std::printf("wrote %s; final mean loss %.6f, holdout auc %s\n", train_out.c_str(),
                  last.mean_loss,
                  last.holdout_auc_defined ? std::to_string(last.holdout_auc).c_str() : "n/a");
    } else if (eval_cmd->parsed()) {
      auto fc = load_file_config();
      fc.apply(eval_cmd, "--threshold", threshold);
      std::vector<eval::ScoredExample> scored;
      cli::Manifest m("eval");
      if (!scores_path.empty()) {
        std::ifstream f(scores_path, std::ios::binary);
        if (!f) throw Error("cannot open scores file: " + scores_path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(f, line)) {
          ++lineno;
          if (line.empty()) continue;
          std::istringstream ls(line);
          double score;
          int label;
          if (!(ls >> score >> label) || (label != 0 && label != 1)) {
            throw Error("scores: line " + std::to_string(lineno) + ": expected score label");
          }
          scored.push_back({score, label});
        }
        m.add_input(scores_path);
      } else {
        if (eval_ckpt.empty() || eval_vocab.empty() || eval_graph.empty() || eval_pairs.empty()) {
          throw Error("eval needs either --scores or all of --ckpt --vocab --graph --pairs");
        }
        auto vocab = load_vocab(eval_vocab, tokenizer_config(fc, eval_cmd));
        auto ck = load_checkpoint_for(vocab, eval_ckpt);
        auto g = graph::BipartiteGraph::load(eval_graph);
        std::ifstream f(eval_pairs, std::ios::binary);
        if (!f) throw Error("cannot open pairs file: " + eval_pairs);
        auto pairs = synth::load_truth_tsv(f);
        scored = score_truth_pairs(pairs, ck, vocab, g);
        m.add_input(eval_ckpt);
        m.add_input(eval_vocab);
        m.add_input(eval_graph);
        m.add_input(eval_pairs);
      }
      auto report = eval::evaluate(scored, threshold);
      std::string json = report.to_json();
      if (!eval_out.empty()) {
        std::ofstream f(eval_out, std::ios::binary);
        if (!f) throw Error("cannot write " + eval_out);
        f << json << '\n';
        m.set_config({{"threshold", threshold}});
        m.add_output(eval_out);
        m.write(eval_out);
      }
      std::printf("%s\n", json.c_str());
    } else if (predict_cmd->parsed()) {
      auto fc = load_file_config();
      auto vocab = load_vocab(pred_vocab, tokenizer_config(fc, predict_cmd));
      auto ck = load_checkpoint_for(vocab, pred_ckpt);
      auto g = graph::BipartiteGraph::load(pred_graph);
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(std::cin, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
          throw Error("predict: line " + std::to_string(lineno) +
                      ": expected query<TAB>title");
        }
        std::string query = line.substr(0, tab);
        std::string title = line.substr(tab + 1);
        auto ex = model::make_example(vocab, ck.config, &g, query, title,
                                      g.find_query(query), g.find_item_by_title(title),
                                      /*exclude_focus_edge=*/false);
        std::printf("%.9g\n", model::forward(ex, ck.params, ck.config).score);
      }
    } else if (ablate_cmd->parsed()) {
      auto fc = load_file_config();
      fc.apply(ablate_cmd, "--subsets", subset_spec);
      fc.apply(ablate_cmd, "--seeds", seed_spec);
      fc.apply(ablate_cmd, "--threshold", ab_threshold);
      ab_model_flags.apply_config(fc, ablate_cmd);
      ab_train_flags.apply_config(fc, ablate_cmd);
      auto g = graph::BipartiteGraph::load(ab_graph);
      auto vocab = load_vocab(ab_vocab, tokenizer_config(fc, ablate_cmd));
      auto table = embed::EmbeddingTable::load(ab_emb, vocab);
      auto dataset = train::load_dataset(ab_dataset, &g);
      auto mcfg = ab_model_flags.to_config();
      auto tcfg = ab_train_flags.to_config(1);
      auto subsets = parse_subset_list(subset_spec);
      auto seeds = parse_seed_list(seed_spec);
      auto result = eval::ablation_run(g, dataset, vocab, table, mcfg, tcfg, subsets, seeds,
                                       ab_threshold);
      {
        std::ofstream f(ab_out, std::ios::binary);
        if (!f) throw Error("cannot write " + ab_out);
        f << result.to_tsv();
      }
      if (!ab_json.empty()) {
        std::ofstream f(ab_json, std::ios::binary);
        if (!f) throw Error("cannot write " + ab_json);
        f << result.to_json() << '\n';
      }
      cli::Manifest m("ablate");
      m.add_input(ab_graph);
      m.add_input(ab_vocab);
      m.add_input(ab_emb);
      m.add_input(ab_dataset);
      auto cfg_json = ab_model_flags.to_json();
      cfg_json.update(ab_train_flags.to_json());
      cfg_json["subsets"] = subset_spec;
      cfg_json["seeds"] = seed_spec;
      cfg_json["threshold"] = ab_threshold;
      m.set_config(cfg_json);
      m.add_output(ab_out);
      if (!ab_json.empty()) m.add_output(ab_json);
      m.write(ab_out);
      std::printf("%s", result.to_tsv().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
