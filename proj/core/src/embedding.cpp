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

#include "hg4sm/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "hg4sm/error.hpp"

namespace hg4sm::embed {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + exp(x)) without overflow; -log(sigmoid(x)) == softplus(-x).
double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Platform-stable uniform in [0,1): uses the raw engine output so results do
// not depend on a library's distribution implementation.
double canonical(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

class UnigramSampler {
 public:
  UnigramSampler(const std::vector<std::int64_t>& counts) {
    cumulative_.reserve(counts.size());
    double acc = 0.0;
    for (std::size_t id = 0; id < counts.size(); ++id) {
      if (id != static_cast<std::size_t>(text::kPadId) && counts[id] > 0) {
        acc += std::pow(static_cast<double>(counts[id]), 0.75);
      }
      cumulative_.push_back(acc);
    }
    total_ = acc;
  }

  bool empty() const { return total_ <= 0.0; }

  text::WordId draw(std::mt19937_64& rng) const {
    double u = canonical(rng) * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<text::WordId>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

}  // namespace

void SkipgramConfig::validate() const {
  if (window < 1) throw Error("skipgram: window must be >= 1");
  if (negatives < 1) throw Error("skipgram: negatives must be >= 1");
  if (epochs < 0) throw Error("skipgram: epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw Error("skipgram: learning rate must be > 0");
}

std::span<const double> EmbeddingTable::row(text::WordId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= m_.rows()) {
    throw Error("embedding: id " + std::to_string(id) + " out of range");
  }
  return m_.row(static_cast<std::size_t>(id));
}

Matrix EmbeddingTable::lookup(std::span<const text::WordId> ids) const {
  Matrix out(ids.size(), static_cast<std::size_t>(dim_));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    auto r = row(ids[k]);
    std::copy(r.begin(), r.end(), out.row(k).begin());
  }
  return out;
}

void EmbeddingTable::save(const std::string& path, const text::Vocab& vocab) const {
  if (vocab.size() != m_.rows()) {
    throw Error("embedding: vocab size mismatch on save");
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("embedding: cannot open for write: " + path);
  f << "#hg4sm-emb v1 " << m_.rows() << ' ' << dim_ << '\n';
  char buf[64];
  for (std::size_t id = 0; id < m_.rows(); ++id) {
    f << vocab.token(static_cast<text::WordId>(id));
    for (std::size_t j = 0; j < m_.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), " %.9g", m_.at(id, j));
      f << buf;
    }
    f << '\n';
  }
  if (!f) throw Error("embedding: write failed: " + path);
}

EmbeddingTable EmbeddingTable::load(const std::string& path, const text::Vocab& vocab) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("embedding: cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw Error("embedding: missing header in " + path);
  std::istringstream hdr(line);
  std::string magic, version;
  std::size_t rows = 0;
  int dim = 0;
  hdr >> magic >> version >> rows >> dim;
  if (magic != "#hg4sm-emb" || version != "v1" || !hdr || rows == 0 || dim <= 0) {
    throw Error("embedding: missing header in " + path);
  }
  if (rows != vocab.size()) {
    throw Error("embedding: vocab size mismatch: file has " + std::to_string(rows) +
                " rows, vocab has " + std::to_string(vocab.size()));
  }
  EmbeddingTable table(rows, dim);
  std::size_t lineno = 1;
  for (std::size_t id = 0; id < rows; ++id) {
    if (!std::getline(f, line)) {
      throw Error("embedding: truncated file, expected " + std::to_string(rows) + " rows");
    }
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok != vocab.token(static_cast<text::WordId>(id))) {
      throw Error("embedding: token mismatch at line " + std::to_string(lineno) +
                  " (got '" + tok + "')");
    }
    for (int j = 0; j < dim; ++j) {
      double v;
      if (!(ls >> v)) {
        throw Error("embedding: parse error at line " + std::to_string(lineno) +
                    ": expected " + std::to_string(dim) + " values");
      }
      table.m_.at(id, static_cast<std::size_t>(j)) = v;
    }
    double extra;
    if (ls >> extra) {
      throw Error("embedding: parse error at line " + std::to_string(lineno) +
                  ": expected " + std::to_string(dim) + " values");
    }
  }
  return table;
}

double sgns_loss(const Matrix& in_vecs, const Matrix& out_vecs, const SkipgramExample& ex) {
  auto vc = in_vecs.row(static_cast<std::size_t>(ex.center));
  double loss = softplus(-dot(out_vecs.row(static_cast<std::size_t>(ex.context)), vc));
  for (auto n : ex.negatives) {
    loss += softplus(dot(out_vecs.row(static_cast<std::size_t>(n)), vc));
  }
  return loss;
}

SgnsGrads sgns_grads(const Matrix& in_vecs, const Matrix& out_vecs, const SkipgramExample& ex) {
  const std::size_t d = in_vecs.cols();
  auto vc = in_vecs.row(static_cast<std::size_t>(ex.center));
  SgnsGrads g;
  g.d_center.assign(d, 0.0);
  g.d_context.assign(d, 0.0);

  auto uo = out_vecs.row(static_cast<std::size_t>(ex.context));
  double gpos = sigmoid(dot(uo, vc)) - 1.0;
  axpy(gpos, uo, g.d_center);
  axpy(gpos, vc, g.d_context);

  g.d_negatives.resize(ex.negatives.size());
  for (std::size_t k = 0; k < ex.negatives.size(); ++k) {
    auto un = out_vecs.row(static_cast<std::size_t>(ex.negatives[k]));
    double gneg = sigmoid(dot(un, vc));
    g.d_negatives[k].assign(d, 0.0);
    axpy(gneg, un, g.d_center);
    axpy(gneg, vc, g.d_negatives[k]);
  }
  return g;
}

EmbeddingTable train_skipgram(const std::vector<std::vector<text::WordId>>& corpus,
                              const text::Vocab& vocab, const SkipgramConfig& cfg,
                              std::vector<double>* epoch_mean_loss) {
  cfg.validate();
  if (cfg.dim < 1) throw Error("skipgram: dim must be >= 1");
  if (corpus.empty()) throw Error("empty training corpus");
  const std::size_t vsz = vocab.size();

  std::vector<std::int64_t> counts(vsz, 0);
  for (const auto& sent : corpus) {
    for (auto id : sent) {
      if (id < 0 || static_cast<std::size_t>(id) >= vsz) {
        throw Error("skipgram: corpus id out of range");
      }
      ++counts[static_cast<std::size_t>(id)];
    }
  }

  const std::size_t d = static_cast<std::size_t>(cfg.dim);
  std::mt19937_64 rng(cfg.seed);
  EmbeddingTable table(vsz, cfg.dim);
  Matrix& in_vecs = table.matrix();
  for (std::size_t id = text::kPadId + 1; id < vsz; ++id) {
    for (std::size_t j = 0; j < d; ++j) {
      in_vecs.at(id, j) = (canonical(rng) - 0.5) / static_cast<double>(cfg.dim);
    }
  }
  Matrix out_vecs(vsz, d);  // zero-initialized output side

  UnigramSampler sampler(counts);
  const double lr = cfg.learning_rate;
  if (epoch_mean_loss) epoch_mean_loss->clear();

  SkipgramExample ex;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    for (const auto& sent : corpus) {
      const int n = static_cast<int>(sent.size());
      for (int c = 0; c < n; ++c) {
        ex.center = sent[static_cast<std::size_t>(c)];
        if (ex.center == text::kPadId) continue;
        for (int off = -cfg.window; off <= cfg.window; ++off) {
          int p = c + off;
          if (off == 0 || p < 0 || p >= n) continue;
          ex.context = sent[static_cast<std::size_t>(p)];
          if (ex.context == text::kPadId || sampler.empty()) continue;

          ex.negatives.clear();
          for (int k = 0; k < cfg.negatives; ++k) {
            text::WordId neg = ex.context;
            for (int tries = 0; tries < 100 && neg == ex.context; ++tries) {
              neg = sampler.draw(rng);
            }
            ex.negatives.push_back(neg);
          }

          loss_sum += sgns_loss(in_vecs, out_vecs, ex);
          ++pairs;
          SgnsGrads g = sgns_grads(in_vecs, out_vecs, ex);
          axpy(-lr, g.d_center, in_vecs.row(static_cast<std::size_t>(ex.center)));
          axpy(-lr, g.d_context, out_vecs.row(static_cast<std::size_t>(ex.context)));
          for (std::size_t k = 0; k < ex.negatives.size(); ++k) {
            axpy(-lr, g.d_negatives[k],
                 out_vecs.row(static_cast<std::size_t>(ex.negatives[k])));
          }
        }
      }
    }
    if (epoch_mean_loss) {
      epoch_mean_loss->push_back(pairs == 0 ? 0.0 : loss_sum / static_cast<double>(pairs));
    }
  }
  // PAD is skipped everywhere above; keep its row exactly zero regardless.
  for (std::size_t j = 0; j < d; ++j) in_vecs.at(text::kPadId, j) = 0.0;
  return table;
}

std::vector<std::vector<text::WordId>> id_corpus(const text::Vocab& vocab,
                                                 std::span<const std::string> texts) {
  std::vector<std::vector<text::WordId>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(vocab.encode_ids(t));
  return out;
}

}  // namespace hg4sm::embed
