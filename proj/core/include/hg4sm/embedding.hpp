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
#include <vector>

#include "hg4sm/matrix.hpp"
#include "hg4sm/textproc.hpp"

namespace hg4sm::embed {

struct SkipgramConfig {
  int dim = 32;
  int window = 5;
  int negatives = 5;  // negatives per positive
  int epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;

  void validate() const;
};

// d-dimensional word vectors, one row per vocab id. Row kPadId stays zero.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t vocab_size, int dim)
      : dim_(dim), m_(vocab_size, static_cast<std::size_t>(dim)) {}

  int dim() const { return dim_; }
  std::size_t vocab_size() const { return m_.rows(); }

  std::span<const double> row(text::WordId id) const;
  Matrix& matrix() { return m_; }
  const Matrix& matrix() const { return m_; }

  // Row-gather; throws on out-of-range ids. PAD gathers the zero row.
  Matrix lookup(std::span<const text::WordId> ids) const;

  // Header "#hg4sm-emb v1 <vocab_size> <d>", then one line per word:
  // token followed by d floats at 9 significant digits.
  void save(const std::string& path, const text::Vocab& vocab) const;
  static EmbeddingTable load(const std::string& path, const text::Vocab& vocab);

  bool operator==(const EmbeddingTable&) const = default;

 private:
  int dim_ = 0;
  Matrix m_;
};

// One skip-gram training event: a (center, context) pair plus its sampled
// negatives. Exposed so the loss/gradient pair below can be checked against
// finite differences independently of the training loop.
struct SkipgramExample {
  text::WordId center;
  text::WordId context;
  std::vector<text::WordId> negatives;
};

// Negative-sampling loss for one example:
//   -log sigmoid(u_ctx . v_c) - sum_k log sigmoid(-u_nk . v_c)
double sgns_loss(const Matrix& in_vecs, const Matrix& out_vecs, const SkipgramExample& ex);

struct SgnsGrads {
  std::vector<double> d_center;                 // wrt in_vecs row `center`
  std::vector<double> d_context;                // wrt out_vecs row `context`
  std::vector<std::vector<double>> d_negatives; // wrt out_vecs rows `negatives[k]`
};
SgnsGrads sgns_grads(const Matrix& in_vecs, const Matrix& out_vecs, const SkipgramExample& ex);

// Skip-gram with negative sampling over token-id sentences. Unigram^0.75
// negative distribution from corpus counts, PAD excluded everywhere,
// deterministic given cfg.seed. Returns the input-side table (PAD row zero).
// epoch_mean_loss, when given, receives one mean per epoch.
EmbeddingTable train_skipgram(const std::vector<std::vector<text::WordId>>& corpus,
                              const text::Vocab& vocab, const SkipgramConfig& cfg,
                              std::vector<double>* epoch_mean_loss = nullptr);

// tokenize+map every text; the usual corpus for train_skipgram.
std::vector<std::vector<text::WordId>> id_corpus(const text::Vocab& vocab,
                                                 std::span<const std::string> texts);

}  // namespace hg4sm::embed
