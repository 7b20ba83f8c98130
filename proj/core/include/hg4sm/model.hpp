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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hg4sm/embedding.hpp"
#include "hg4sm/graph.hpp"
#include "hg4sm/matrix.hpp"
#include "hg4sm/textproc.hpp"

namespace hg4sm::model {

enum class Activation : std::uint8_t { Tanh, ReLU, Identity };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

// Which signal blocks feed the fusion layers: representation-focused (macro),
// interaction-focused (micro), and the metapath/graph block.
struct ComponentSet {
  bool rep = true;
  bool interaction = true;
  bool hin = true;

  bool any() const { return rep || interaction || hin; }
  bool operator==(const ComponentSet&) const = default;
};

ComponentSet parse_components(std::string_view csv);  // e.g. "rep,int,hin"
std::string components_name(const ComponentSet& c);

struct ModelConfig {
  int d = 32;    // word embedding dim
  int l_q = 8;   // fixed query length
  int l_i = 20;  // fixed title length
  int h1 = 256;
  int h2 = 64;
  ComponentSet components;
  Activation activation = Activation::Tanh;  // sigma for attention + metapath mix

  int fusion_input_dim() const;
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// All trainable state plus the word-embedding table (frozen unless the
// trainer is told otherwise). Plain data; serialization and the optimizer
// walk it through tensor_views().
struct ModelParams {
  Matrix p_q;                  // l_q x d position table, query side
  Matrix p_i;                  // l_i x d position table, item side
  std::vector<double> w_att;   // 1 x 2d attention vector, shared by both metapaths
  double b_att = 0.0;
  Matrix w1;                   // h1 x n_in
  std::vector<double> b1;      // h1
  Matrix w2;                   // h2 x h1
  std::vector<double> b2;      // h2
  std::vector<double> w3;      // 1 x h2
  double b3 = 0.0;
  Matrix word_emb;             // vocab x d

  bool operator==(const ModelParams&) const = default;
};

// Zero positions, Xavier-style fusion layers, small random attention vector;
// copies the word table in. Deterministic per seed.
ModelParams init_params(const ModelConfig& cfg, const embed::EmbeddingTable& table,
                        std::uint64_t seed);

// Uniform [-scale, scale] fill of every tensor including positions; used by
// gradient checks that want a generic point in parameter space.
void randomize_params(ModelParams& params, std::uint64_t seed, double scale);

struct TensorView {
  std::string name;
  double* data;
  std::size_t rows;
  std::size_t cols;
  std::size_t size() const { return rows * cols; }
};
// Stable-order views over the trainable tensors; word_emb included on demand.
std::vector<TensorView> tensor_views(ModelParams& params, bool include_word_emb);

// Mirrors ModelParams shapes; word_emb left empty when embeddings are frozen.
struct ModelGrads {
  Matrix p_q;
  Matrix p_i;
  std::vector<double> w_att;
  double b_att = 0.0;
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
  std::vector<double> w3;
  double b3 = 0.0;
  Matrix word_emb;
};
ModelGrads zero_grads(const ModelConfig& cfg, const ModelParams& params, bool with_word_emb);
void accumulate(ModelGrads& into, const ModelGrads& from);
void scale(ModelGrads& g, double factor);
std::vector<TensorView> tensor_views(ModelGrads& grads, bool include_word_emb);

// ---- encoded inputs ----

struct EncodedText {
  std::vector<text::WordId> ids;  // fixed length
  int true_len = 0;
};

struct EncodedInstance {
  EncodedText middle;
  EncodedText terminal;
  bool padded = true;
};

struct EncodedExample {
  EncodedText query;                       // length l_q
  EncodedText title;                       // length l_i
  std::array<EncodedInstance, 2> qiq;      // middle: item text, terminal: query text
  std::array<EncodedInstance, 2> iqi;      // middle: query text, terminal: item text
};

// Encode a focus pair plus its metapath context. When a side of the pair is
// missing from the graph (or graph == nullptr) that side's instances are
// padded, which is also the cold-start inference path.
EncodedExample make_example(const text::Vocab& vocab, const ModelConfig& cfg,
                            const graph::BipartiteGraph* g, std::string_view query_text,
                            std::string_view title, std::optional<graph::NodeRef> q,
                            std::optional<graph::NodeRef> i, bool exclude_focus_edge);

// Convenience: looks up both nodes, then defers to the overload above.
EncodedExample make_example(const text::Vocab& vocab, const ModelConfig& cfg,
                            const graph::BipartiteGraph& g, graph::NodeRef q,
                            graph::NodeRef i, bool exclude_focus_edge);

// ---- building blocks (each is one scoring stage, unit-testable alone) ----

struct SeqEmbedding {
  std::vector<double> value;  // d
  bool degenerate = false;    // true_len == 0
};

// Element-wise mean of the first true_len word vectors (PAD excluded).
SeqEmbedding sequence_embedding(const Matrix& word_emb, std::span<const text::WordId> ids,
                                int true_len);

// M[i][j] = <E_q_i + P_q_i, E_i_j + P_i_j>; PAD rows/columns are zero.
Matrix interaction_matrix(const EncodedText& query, const EncodedText& title,
                          const ModelParams& params, const ModelConfig& cfg);

// Row-major flattening of the interaction matrix.
std::vector<double> interaction_embedding(const Matrix& m_int);

// Mean of {central, middle, terminal} sequence embeddings; zero when padded.
std::vector<double> instance_embedding(const SeqEmbedding& central, const SeqEmbedding& middle,
                                       const SeqEmbedding& terminal, bool padded, int d);

// Softmax over sigma(w_att . concat(central, e_k) + b) for unpadded k.
std::array<double, 2> attention_weights(std::span<const double> central,
                                        const std::array<std::vector<double>, 2>& inst,
                                        const std::array<bool, 2>& padded,
                                        const ModelParams& params, const ModelConfig& cfg);

// sigma(a_1 e_1 + a_2 e_2); zero vector when both instances are padded.
std::vector<double> metapath_embedding(const std::array<std::vector<double>, 2>& inst,
                                       const std::array<double, 2>& weights,
                                       const std::array<bool, 2>& padded,
                                       const ModelConfig& cfg);

// ---- forward / backward ----

struct MetapathTrace {
  std::array<std::vector<double>, 2> inst;  // e_k (zero when padded)
  std::array<bool, 2> padded{true, true};
  std::array<double, 2> att_pre{};     // w_att . concat + b
  std::array<double, 2> att_logit{};   // sigma of the above
  std::array<double, 2> att_weight{};  // softmax over unpadded logits
  std::vector<double> mix;             // a_1 e_1 + a_2 e_2
  std::vector<double> value;           // sigma(mix), the metapath embedding
  bool all_padded = true;
};

struct ForwardTrace {
  EncodedExample ex;
  SeqEmbedding seq_q, seq_i;
  std::array<SeqEmbedding, 2> qiq_mid, qiq_term, iqi_mid, iqi_term;
  Matrix aug_q;  // l_q x d rows E + P (zero rows at PAD positions)
  Matrix aug_i;  // l_i x d
  Matrix m_int;
  MetapathTrace qiq, iqi;
  std::vector<double> fusion_in;
  std::vector<double> z1, a1, z2, a2;
  double z3 = 0.0;
  double score = 0.5;
};

struct ForwardResult {
  double score;
  ForwardTrace trace;
};

ForwardResult forward(const EncodedExample& ex, const ModelParams& params,
                      const ModelConfig& cfg);

inline constexpr double kScoreEpsilon = 1e-7;  // clamp for the BCE loss

// Binary cross-entropy on the clamped score.
double bce_loss(double score, double label);

// Exact gradients of bce_loss(forward(ex)) wrt every trainable tensor.
// Word-embedding gradients are produced only when grad_word_emb is set.
ModelGrads backward(const ForwardTrace& trace, double label, const ModelParams& params,
                    const ModelConfig& cfg, bool grad_word_emb = false);

// ---- checkpoint ----

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

// "#hg4sm-ckpt v1": config line, then named tensors at 9 significant digits.
void save_checkpoint(const ModelParams& params, const ModelConfig& cfg,
                     const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hg4sm::model
