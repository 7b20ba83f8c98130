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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "hg4sm/embedding.hpp"
#include "hg4sm/error.hpp"
#include "test_util.hpp"

using namespace hg4sm;
using namespace hg4sm::embed;
using hg4sm::text::WordId;

namespace {

text::Vocab toy_vocab(const std::vector<std::string>& words) {
  std::string joined;
  for (const auto& w : words) {
    joined += w;
    joined += ' ';
  }
  std::vector<std::string> corpus = {joined};
  return text::build_vocab(corpus, 1, 1000);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double na = std::sqrt(dot(a, a));
  double nb = std::sqrt(dot(b, b));
  return dot(a, b) / (na * nb);
}

}  // namespace

TEST_CASE("sgns: analytic gradient matches central finite differences") {
  const int d = 8;
  std::mt19937_64 rng(11);
  auto fill = [&](Matrix& m) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      m.data()[k] = (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5);
    }
  };
  Matrix in_vecs(6, d), out_vecs(6, d);
  fill(in_vecs);
  fill(out_vecs);
  SkipgramExample ex{2, 4, {1, 5, 4}};  // one negative collides with the context

  auto grads = sgns_grads(in_vecs, out_vecs, ex);

  const double h = 1e-5;
  auto fd = [&](Matrix& m, std::size_t r, std::size_t c) {
    double keep = m.at(r, c);
    m.at(r, c) = keep + h;
    double up = sgns_loss(in_vecs, out_vecs, ex);
    m.at(r, c) = keep - h;
    double down = sgns_loss(in_vecs, out_vecs, ex);
    m.at(r, c) = keep;
    return (up - down) / (2 * h);
  };
  auto check = [&](double analytic, double numeric) {
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    CHECK(std::abs(analytic - numeric) / denom < 1e-4);
  };

  for (int j = 0; j < d; ++j) {
    auto jj = static_cast<std::size_t>(j);
    check(grads.d_center[jj], fd(in_vecs, 2, jj));
    // row 4 is both the context and negatives[2]; its total gradient is the sum
    check(grads.d_context[jj] + grads.d_negatives[2][jj], fd(out_vecs, 4, jj));
    check(grads.d_negatives[0][jj], fd(out_vecs, 1, jj));
    check(grads.d_negatives[1][jj], fd(out_vecs, 5, jj));
  }
}

TEST_CASE("train_skipgram: co-occurring words end up closer") {
  auto vocab = toy_vocab({"红", "裙", "手", "机"});
  WordId red = vocab.id_of("红"), skirt = vocab.id_of("裙"), shou = vocab.id_of("手");

  std::vector<std::vector<WordId>> corpus;
  for (int k = 0; k < 200; ++k) {
    corpus.push_back({red, skirt, red, skirt});
    corpus.push_back({shou, vocab.id_of("机"), shou, vocab.id_of("机")});
  }

  SkipgramConfig cfg;
  cfg.dim = 16;
  cfg.window = 2;
  cfg.negatives = 4;
  cfg.epochs = 50;
  cfg.learning_rate = 0.05;
  cfg.seed = 5;
  std::vector<double> losses;
  auto table = train_skipgram(corpus, vocab, cfg, &losses);

  CHECK(cosine(table.row(red), table.row(skirt)) > cosine(table.row(red), table.row(shou)));
  REQUIRE(losses.size() == 50);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("train_skipgram: epochs=0 returns the seeded init, PAD row zero") {
  auto vocab = toy_vocab({"a", "b", "c"});
  std::vector<std::vector<WordId>> corpus = {
      {vocab.id_of("a"), vocab.id_of("b"), vocab.id_of("c")}};
  SkipgramConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 0;
  cfg.seed = 9;
  auto t0 = train_skipgram(corpus, vocab, cfg);
  auto t0_again = train_skipgram(corpus, vocab, cfg);
  CHECK(t0 == t0_again);
  for (auto v : t0.row(text::kPadId)) CHECK(v == 0.0);
  // init bounds per the documented scheme
  for (WordId id = 1; id < static_cast<WordId>(vocab.size()); ++id) {
    for (auto v : t0.row(id)) CHECK(std::abs(v) <= 0.5 / cfg.dim);
  }
}

TEST_CASE("train_skipgram: seeded determinism and PAD invariance after training") {
  auto vocab = toy_vocab({"a", "b", "c", "d"});
  std::vector<std::vector<WordId>> corpus;
  std::mt19937_64 rng(3);
  for (int s = 0; s < 30; ++s) {
    std::vector<WordId> sent;
    for (int k = 0; k < 6; ++k) {
      sent.push_back(static_cast<WordId>(text::kReservedIds + rng() % 4));
    }
    corpus.push_back(sent);
  }
  SkipgramConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 3;
  cfg.seed = 42;
  auto t1 = train_skipgram(corpus, vocab, cfg);
  auto t2 = train_skipgram(corpus, vocab, cfg);
  CHECK(t1 == t2);
  for (auto v : t1.row(text::kPadId)) CHECK(v == 0.0);

  cfg.seed = 43;
  auto t3 = train_skipgram(corpus, vocab, cfg);
  CHECK(t1 != t3);
}

TEST_CASE("train_skipgram: empty corpus rejected") {
  auto vocab = toy_vocab({"a"});
  std::vector<std::vector<WordId>> corpus;
  SkipgramConfig cfg;
  CHECK_THROWS_WITH_AS(train_skipgram(corpus, vocab, cfg), "empty training corpus", Error);
}

TEST_CASE("embedding table: lookup semantics") {
  auto vocab = toy_vocab({"a", "b"});
  std::vector<std::vector<WordId>> corpus = {{vocab.id_of("a"), vocab.id_of("b")}};
  SkipgramConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 2;
  auto table = train_skipgram(corpus, vocab, cfg);

  auto rows = table.lookup(std::vector<WordId>{text::kPadId, vocab.id_of("a"), text::kUnkId});
  for (std::size_t j = 0; j < 4; ++j) CHECK(rows.at(0, j) == 0.0);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(rows.at(1, j) == table.row(vocab.id_of("a"))[j]);
  }
  // UNK row is a real (initialized/trainable) vector
  double unk_norm = 0;
  for (std::size_t j = 0; j < 4; ++j) unk_norm += rows.at(2, j) * rows.at(2, j);
  CHECK(unk_norm > 0.0);

  CHECK_THROWS_AS(table.lookup(std::vector<WordId>{99}), Error);
  CHECK_THROWS_AS(table.lookup(std::vector<WordId>{-1}), Error);
}

TEST_CASE("embedding file: save/load round trip is stable at stored precision") {
  auto vocab = toy_vocab({"红", "iphone11", "mac"});
  std::vector<std::vector<WordId>> corpus = {
      {vocab.id_of("红"), vocab.id_of("iphone11"), vocab.id_of("mac")}};
  SkipgramConfig cfg;
  cfg.dim = 5;
  cfg.epochs = 3;
  auto table = train_skipgram(corpus, vocab, cfg);

  std::string path = temp_file_path("emb_roundtrip.tsv");
  table.save(path, vocab);
  auto loaded = EmbeddingTable::load(path, vocab);
  // values agree to the stored 9 significant digits...
  for (std::size_t r = 0; r < table.vocab_size(); ++r) {
    for (int j = 0; j < table.dim(); ++j) {
      CHECK(loaded.matrix().at(r, static_cast<std::size_t>(j)) ==
            doctest::Approx(table.matrix().at(r, static_cast<std::size_t>(j))).epsilon(1e-8));
    }
  }
  // ...and a second trip through the file is bitwise identical
  std::string path2 = temp_file_path("emb_roundtrip2.tsv");
  loaded.save(path2, vocab);
  auto loaded2 = EmbeddingTable::load(path2, vocab);
  CHECK(loaded == loaded2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("embedding file: malformed inputs rejected with location") {
  auto vocab = toy_vocab({"a", "b"});

  SUBCASE("empty file -> missing header") {
    std::string path = temp_file_path("emb_empty.tsv");
    std::ofstream(path).close();
    CHECK_THROWS_WITH_AS(EmbeddingTable::load(path, vocab),
                         doctest::Contains("missing header"), Error);
    std::remove(path.c_str());
  }
  SUBCASE("row with wrong arity -> parse error with line number") {
    std::string path = temp_file_path("emb_badrow.tsv");
    std::ofstream f(path, std::ios::binary);
    f << "#hg4sm-emb v1 4 8\n";
    f << "<pad> 0 0 0 0 0 0 0 0\n";
    f << "<unk> 0.1 0.1 0.1 0.1 0.1 0.1 0.1 0.1\n";
    f << "a 1 2 3 4 5 6 7\n";  // 7 of 8 values
    f << "b 1 2 3 4 5 6 7 8\n";
    f.close();
    CHECK_THROWS_WITH_AS(EmbeddingTable::load(path, vocab), doctest::Contains("line 4"), Error);
    std::remove(path.c_str());
  }
  SUBCASE("vocab size mismatch") {
    std::string path = temp_file_path("emb_badsize.tsv");
    std::ofstream f(path, std::ios::binary);
    f << "#hg4sm-emb v1 3 2\n<pad> 0 0\n<unk> 0 0\nzzz 1 1\n";
    f.close();
    CHECK_THROWS_WITH_AS(EmbeddingTable::load(path, vocab),
                         doctest::Contains("vocab size mismatch"), Error);
    std::remove(path.c_str());
  }
}
