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

#include "hg4sm/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "hg4sm/error.hpp"

namespace hg4sm::model {

namespace {

double canonical(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * canonical(rng);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double act(Activation a, double x) {
  switch (a) {
    case Activation::Tanh: return std::tanh(x);
    case Activation::ReLU: return x > 0 ? x : 0.0;
    case Activation::Identity: return x;
  }
  return x;
}

// Derivative given both the pre-activation and the activated value.
double act_grad(Activation a, double pre, double val) {
  switch (a) {
    case Activation::Tanh: return 1.0 - val * val;
    case Activation::ReLU: return pre > 0 ? 1.0 : 0.0;
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

void check_word_id(const Matrix& word_emb, text::WordId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= word_emb.rows()) {
    throw Error("model: word id out of range");
  }
}

void check_shapes(const ModelParams& p, const ModelConfig& cfg) {
  const auto d = static_cast<std::size_t>(cfg.d);
  const auto n_in = static_cast<std::size_t>(cfg.fusion_input_dim());
  bool ok = p.p_q.rows() == static_cast<std::size_t>(cfg.l_q) && p.p_q.cols() == d &&
            p.p_i.rows() == static_cast<std::size_t>(cfg.l_i) && p.p_i.cols() == d &&
            p.w_att.size() == 2 * d &&
            p.w1.rows() == static_cast<std::size_t>(cfg.h1) && p.w1.cols() == n_in &&
            p.b1.size() == static_cast<std::size_t>(cfg.h1) &&
            p.w2.rows() == static_cast<std::size_t>(cfg.h2) &&
            p.w2.cols() == static_cast<std::size_t>(cfg.h1) &&
            p.b2.size() == static_cast<std::size_t>(cfg.h2) &&
            p.w3.size() == static_cast<std::size_t>(cfg.h2) && p.word_emb.cols() == d;
  if (!ok) throw Error("model: params do not match config shapes");
}

void check_text(const EncodedText& t, int len, const char* what) {
  if (t.ids.size() != static_cast<std::size_t>(len) || t.true_len < 0 ||
      t.true_len > len) {
    throw Error(std::string("model: encoded ") + what + " has wrong length");
  }
}

EncodedText to_encoded(text::Encoded e) {
  return EncodedText{std::move(e.ids), e.true_len};
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::ReLU;
  if (name == "identity") return Activation::Identity;
  throw Error("model: unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::ReLU: return "relu";
    case Activation::Identity: return "identity";
  }
  return "tanh";
}

ComponentSet parse_components(std::string_view csv) {
  ComponentSet c{false, false, false};
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t comma = csv.find(',', start);
    std::string_view part = csv.substr(
        start, comma == std::string_view::npos ? csv.size() - start : comma - start);
    if (part == "rep") {
      c.rep = true;
    } else if (part == "int") {
      c.interaction = true;
    } else if (part == "hin") {
      c.hin = true;
    } else if (!part.empty()) {
      throw Error("model: unknown component '" + std::string(part) + "'");
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (!c.any()) throw Error("model: component set must not be empty");
  return c;
}

std::string components_name(const ComponentSet& c) {
  std::string out;
  auto append = [&](const char* name) {
    if (!out.empty()) out += ',';
    out += name;
  };
  if (c.rep) append("rep");
  if (c.interaction) append("int");
  if (c.hin) append("hin");
  return out;
}

int ModelConfig::fusion_input_dim() const {
  int n = 0;
  if (components.rep) n += 2 * d;
  if (components.interaction) n += l_q * l_i;
  if (components.hin) n += 2 * d;
  return n;
}

void ModelConfig::validate() const {
  if (d < 1 || l_q < 1 || l_i < 1 || h1 < 1 || h2 < 1) {
    throw Error("model: d, l_q, l_i, h1, h2 must all be >= 1");
  }
  if (!components.any()) throw Error("model: component set must not be empty");
}

ModelParams init_params(const ModelConfig& cfg, const embed::EmbeddingTable& table,
                        std::uint64_t seed) {
  cfg.validate();
  if (table.dim() != cfg.d) {
    throw Error("model: embedding dim " + std::to_string(table.dim()) +
                " does not match config d=" + std::to_string(cfg.d));
  }
  const auto d = static_cast<std::size_t>(cfg.d);
  const auto n_in = static_cast<std::size_t>(cfg.fusion_input_dim());
  std::mt19937_64 rng(seed);

  ModelParams p;
  p.p_q = Matrix(static_cast<std::size_t>(cfg.l_q), d);
  p.p_i = Matrix(static_cast<std::size_t>(cfg.l_i), d);
  p.w_att.assign(2 * d, 0.0);
  double att_scale = 1.0 / std::sqrt(static_cast<double>(2 * d));
  for (auto& v : p.w_att) v = uniform(rng, -att_scale, att_scale);

  auto xavier = [&](Matrix& m, std::size_t fan_in, std::size_t fan_out) {
    double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = uniform(rng, -s, s);
  };
  p.w1 = Matrix(static_cast<std::size_t>(cfg.h1), n_in);
  xavier(p.w1, n_in, static_cast<std::size_t>(cfg.h1));
  p.b1.assign(static_cast<std::size_t>(cfg.h1), 0.0);
  p.w2 = Matrix(static_cast<std::size_t>(cfg.h2), static_cast<std::size_t>(cfg.h1));
  xavier(p.w2, static_cast<std::size_t>(cfg.h1), static_cast<std::size_t>(cfg.h2));
  p.b2.assign(static_cast<std::size_t>(cfg.h2), 0.0);
  p.w3.assign(static_cast<std::size_t>(cfg.h2), 0.0);
  double s3 = std::sqrt(6.0 / static_cast<double>(cfg.h2 + 1));
  for (auto& v : p.w3) v = uniform(rng, -s3, s3);

  p.word_emb = table.matrix();
  return p;
}

void randomize_params(ModelParams& params, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  for (auto& view : tensor_views(params, /*include_word_emb=*/true)) {
    for (std::size_t k = 0; k < view.size(); ++k) {
      view.data[k] = uniform(rng, -scale, scale);
    }
  }
  // PAD row stays zero so padded positions keep contributing nothing.
  for (std::size_t j = 0; j < params.word_emb.cols(); ++j) {
    params.word_emb.at(static_cast<std::size_t>(text::kPadId), j) = 0.0;
  }
}

template <typename P>
static std::vector<TensorView> tensor_views_impl(P& p, bool include_word_emb) {
  std::vector<TensorView> v;
  v.push_back({"p_q", p.p_q.data(), p.p_q.rows(), p.p_q.cols()});
  v.push_back({"p_i", p.p_i.data(), p.p_i.rows(), p.p_i.cols()});
  v.push_back({"w_att", p.w_att.data(), 1, p.w_att.size()});
  v.push_back({"b_att", &p.b_att, 1, 1});
  v.push_back({"w1", p.w1.data(), p.w1.rows(), p.w1.cols()});
  v.push_back({"b1", p.b1.data(), 1, p.b1.size()});
  v.push_back({"w2", p.w2.data(), p.w2.rows(), p.w2.cols()});
  v.push_back({"b2", p.b2.data(), 1, p.b2.size()});
  v.push_back({"w3", p.w3.data(), 1, p.w3.size()});
  v.push_back({"b3", &p.b3, 1, 1});
  if (include_word_emb) {
    v.push_back({"word_emb", p.word_emb.data(), p.word_emb.rows(), p.word_emb.cols()});
  }
  return v;
}

std::vector<TensorView> tensor_views(ModelParams& params, bool include_word_emb) {
  return tensor_views_impl(params, include_word_emb);
}

std::vector<TensorView> tensor_views(ModelGrads& grads, bool include_word_emb) {
  return tensor_views_impl(grads, include_word_emb);
}

ModelGrads zero_grads(const ModelConfig& cfg, const ModelParams& params, bool with_word_emb) {
  ModelGrads g;
  g.p_q = Matrix(params.p_q.rows(), params.p_q.cols());
  g.p_i = Matrix(params.p_i.rows(), params.p_i.cols());
  g.w_att.assign(params.w_att.size(), 0.0);
  g.w1 = Matrix(params.w1.rows(), params.w1.cols());
  g.b1.assign(params.b1.size(), 0.0);
  g.w2 = Matrix(params.w2.rows(), params.w2.cols());
  g.b2.assign(params.b2.size(), 0.0);
  g.w3.assign(params.w3.size(), 0.0);
  if (with_word_emb) g.word_emb = Matrix(params.word_emb.rows(), params.word_emb.cols());
  (void)cfg;
  return g;
}

void accumulate(ModelGrads& into, const ModelGrads& from) {
  auto add = [](auto& a, const auto& b) {
    for (std::size_t k = 0; k < b.size(); ++k) a.data()[k] += b.data()[k];
  };
  add(into.p_q, from.p_q);
  add(into.p_i, from.p_i);
  for (std::size_t k = 0; k < from.w_att.size(); ++k) into.w_att[k] += from.w_att[k];
  into.b_att += from.b_att;
  add(into.w1, from.w1);
  for (std::size_t k = 0; k < from.b1.size(); ++k) into.b1[k] += from.b1[k];
  add(into.w2, from.w2);
  for (std::size_t k = 0; k < from.b2.size(); ++k) into.b2[k] += from.b2[k];
  for (std::size_t k = 0; k < from.w3.size(); ++k) into.w3[k] += from.w3[k];
  into.b3 += from.b3;
  if (!from.word_emb.empty() && !into.word_emb.empty()) add(into.word_emb, from.word_emb);
}

void scale(ModelGrads& g, double factor) {
  for (auto& view : tensor_views(g, !g.word_emb.empty())) {
    for (std::size_t k = 0; k < view.size(); ++k) view.data[k] *= factor;
  }
}

EncodedExample make_example(const text::Vocab& vocab, const ModelConfig& cfg,
                            const graph::BipartiteGraph* g, std::string_view query_text,
                            std::string_view title, std::optional<graph::NodeRef> q,
                            std::optional<graph::NodeRef> i, bool exclude_focus_edge) {
  EncodedExample ex;
  ex.query = to_encoded(vocab.encode(query_text, cfg.l_q));
  ex.title = to_encoded(vocab.encode(title, cfg.l_i));
  if (g == nullptr) return ex;

  std::optional<graph::NodeRef> ex_q = exclude_focus_edge ? q : std::nullopt;
  std::optional<graph::NodeRef> ex_i = exclude_focus_edge ? i : std::nullopt;

  auto encode_node = [&](graph::NodeRef n) {
    int len = n.kind == graph::NodeKind::Query ? cfg.l_q : cfg.l_i;
    return to_encoded(vocab.encode(g->text_of(n), len));
  };
  auto fill = [&](std::array<EncodedInstance, 2>& dst,
                  const std::array<graph::MetapathInstance, 2>& src) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (src[k].padded) continue;
      dst[k].middle = encode_node(src[k].middle);
      dst[k].terminal = encode_node(src[k].terminal);
      dst[k].padded = false;
    }
  };
  if (q) fill(ex.qiq, graph::qiq_instances(*g, *q, ex_i, ex_q));
  if (i) fill(ex.iqi, graph::iqi_instances(*g, *i, ex_q, ex_i));
  return ex;
}

EncodedExample make_example(const text::Vocab& vocab, const ModelConfig& cfg,
                            const graph::BipartiteGraph& g, graph::NodeRef q,
                            graph::NodeRef i, bool exclude_focus_edge) {
  return make_example(vocab, cfg, &g, g.query_text(q.id), g.item_title(i.id), q, i,
                      exclude_focus_edge);
}

SeqEmbedding sequence_embedding(const Matrix& word_emb, std::span<const text::WordId> ids,
                                int true_len) {
  SeqEmbedding out;
  out.value.assign(word_emb.cols(), 0.0);
  if (true_len <= 0) {
    out.degenerate = true;
    return out;
  }
  for (int k = 0; k < true_len; ++k) {
    check_word_id(word_emb, ids[static_cast<std::size_t>(k)]);
    axpy(1.0, word_emb.row(static_cast<std::size_t>(ids[static_cast<std::size_t>(k)])),
         out.value);
  }
  double inv = 1.0 / static_cast<double>(true_len);
  for (auto& v : out.value) v *= inv;
  return out;
}

namespace {

// Word vector + position vector per slot; zero rows at PAD positions.
Matrix augmented_rows(const Matrix& word_emb, const Matrix& pos, const EncodedText& t) {
  Matrix out(pos.rows(), pos.cols());
  for (int k = 0; k < t.true_len; ++k) {
    auto idx = static_cast<std::size_t>(k);
    check_word_id(word_emb, t.ids[idx]);
    auto w = word_emb.row(static_cast<std::size_t>(t.ids[idx]));
    auto p = pos.row(idx);
    auto o = out.row(idx);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] = w[j] + p[j];
  }
  return out;
}

}  // namespace

Matrix interaction_matrix(const EncodedText& query, const EncodedText& title,
                          const ModelParams& params, const ModelConfig& cfg) {
  check_text(query, cfg.l_q, "query");
  check_text(title, cfg.l_i, "title");
  Matrix aug_q = augmented_rows(params.word_emb, params.p_q, query);
  Matrix aug_i = augmented_rows(params.word_emb, params.p_i, title);
  Matrix m(static_cast<std::size_t>(cfg.l_q), static_cast<std::size_t>(cfg.l_i));
  for (int a = 0; a < query.true_len; ++a) {
    for (int b = 0; b < title.true_len; ++b) {
      m.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) =
          dot(aug_q.row(static_cast<std::size_t>(a)), aug_i.row(static_cast<std::size_t>(b)));
    }
  }
  return m;
}

std::vector<double> interaction_embedding(const Matrix& m_int) {
  return std::vector<double>(m_int.data(), m_int.data() + m_int.size());
}

std::vector<double> instance_embedding(const SeqEmbedding& central, const SeqEmbedding& middle,
                                       const SeqEmbedding& terminal, bool padded, int d) {
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  if (padded) return out;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = (central.value[j] + middle.value[j] + terminal.value[j]) / 3.0;
  }
  return out;
}

std::array<double, 2> attention_weights(std::span<const double> central,
                                        const std::array<std::vector<double>, 2>& inst,
                                        const std::array<bool, 2>& padded,
                                        const ModelParams& params, const ModelConfig& cfg) {
  const auto d = static_cast<std::size_t>(cfg.d);
  std::array<double, 2> logits{0.0, 0.0};
  std::array<double, 2> weights{0.0, 0.0};
  double max_logit = -1e300;
  bool any = false;
  for (std::size_t k = 0; k < 2; ++k) {
    if (padded[k]) continue;
    double pre = params.b_att;
    pre += dot({params.w_att.data(), d}, central);
    pre += dot({params.w_att.data() + d, d}, {inst[k].data(), d});
    logits[k] = act(cfg.activation, pre);
    max_logit = std::max(max_logit, logits[k]);
    any = true;
  }
  if (!any) return weights;
  double denom = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    if (padded[k]) continue;
    weights[k] = std::exp(logits[k] - max_logit);
    denom += weights[k];
  }
  for (std::size_t k = 0; k < 2; ++k) {
    if (!padded[k]) weights[k] /= denom;
  }
  return weights;
}

std::vector<double> metapath_embedding(const std::array<std::vector<double>, 2>& inst,
                                       const std::array<double, 2>& weights,
                                       const std::array<bool, 2>& padded,
                                       const ModelConfig& cfg) {
  std::vector<double> out(static_cast<std::size_t>(cfg.d), 0.0);
  if (padded[0] && padded[1]) return out;  // activation skipped entirely
  for (std::size_t k = 0; k < 2; ++k) {
    if (padded[k]) continue;
    axpy(weights[k], {inst[k].data(), inst[k].size()}, out);
  }
  for (auto& v : out) v = act(cfg.activation, v);
  return out;
}

namespace {

// Shared by forward(): fills one metapath's trace (instances, attention,
// mixed embedding) given the central node's sequence embedding.
void run_metapath(const std::array<EncodedInstance, 2>& encoded, const SeqEmbedding& central,
                  std::array<SeqEmbedding, 2>& mid_seq, std::array<SeqEmbedding, 2>& term_seq,
                  MetapathTrace& mp, const ModelParams& params, const ModelConfig& cfg) {
  const auto d = static_cast<std::size_t>(cfg.d);
  mp.mix.assign(d, 0.0);
  mp.value.assign(d, 0.0);
  for (std::size_t k = 0; k < 2; ++k) {
    mp.padded[k] = encoded[k].padded;
    if (encoded[k].padded) {
      mp.inst[k].assign(d, 0.0);
      continue;
    }
    mid_seq[k] = sequence_embedding(params.word_emb, encoded[k].middle.ids,
                                    encoded[k].middle.true_len);
    term_seq[k] = sequence_embedding(params.word_emb, encoded[k].terminal.ids,
                                     encoded[k].terminal.true_len);
    mp.inst[k] = instance_embedding(central, mid_seq[k], term_seq[k], false, cfg.d);
  }
  mp.all_padded = mp.padded[0] && mp.padded[1];
  if (mp.all_padded) return;

  // attention (keep raw pre-activations for backprop)
  for (std::size_t k = 0; k < 2; ++k) {
    if (mp.padded[k]) continue;
    double pre = params.b_att;
    pre += dot({params.w_att.data(), d}, {central.value.data(), d});
    pre += dot({params.w_att.data() + d, d}, {mp.inst[k].data(), d});
    mp.att_pre[k] = pre;
    mp.att_logit[k] = act(cfg.activation, pre);
  }
  double max_logit = -1e300;
  for (std::size_t k = 0; k < 2; ++k) {
    if (!mp.padded[k]) max_logit = std::max(max_logit, mp.att_logit[k]);
  }
  double denom = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    if (mp.padded[k]) continue;
    mp.att_weight[k] = std::exp(mp.att_logit[k] - max_logit);
    denom += mp.att_weight[k];
  }
  double wsum = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    if (mp.padded[k]) continue;
    mp.att_weight[k] /= denom;
    wsum += mp.att_weight[k];
    axpy(mp.att_weight[k], {mp.inst[k].data(), d}, mp.mix);
  }
  if (std::abs(wsum - 1.0) > 1e-9) {
    throw Error("model: attention weights failed to normalize");
  }
  for (std::size_t j = 0; j < d; ++j) mp.value[j] = act(cfg.activation, mp.mix[j]);
}

}  // namespace

ForwardResult forward(const EncodedExample& ex, const ModelParams& params,
                      const ModelConfig& cfg) {
  cfg.validate();
  check_shapes(params, cfg);
  check_text(ex.query, cfg.l_q, "query");
  check_text(ex.title, cfg.l_i, "title");

  ForwardTrace tr;
  tr.ex = ex;
  const auto d = static_cast<std::size_t>(cfg.d);

  tr.seq_q = sequence_embedding(params.word_emb, ex.query.ids, ex.query.true_len);
  tr.seq_i = sequence_embedding(params.word_emb, ex.title.ids, ex.title.true_len);

  if (cfg.components.interaction) {
    tr.aug_q = augmented_rows(params.word_emb, params.p_q, ex.query);
    tr.aug_i = augmented_rows(params.word_emb, params.p_i, ex.title);
    tr.m_int = Matrix(static_cast<std::size_t>(cfg.l_q), static_cast<std::size_t>(cfg.l_i));
    for (int a = 0; a < ex.query.true_len; ++a) {
      for (int b = 0; b < ex.title.true_len; ++b) {
        tr.m_int.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) = dot(
            tr.aug_q.row(static_cast<std::size_t>(a)), tr.aug_i.row(static_cast<std::size_t>(b)));
      }
    }
  }

  if (cfg.components.hin) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!ex.qiq[k].padded) {
        check_text(ex.qiq[k].middle, cfg.l_i, "qiq middle");
        check_text(ex.qiq[k].terminal, cfg.l_q, "qiq terminal");
      }
      if (!ex.iqi[k].padded) {
        check_text(ex.iqi[k].middle, cfg.l_q, "iqi middle");
        check_text(ex.iqi[k].terminal, cfg.l_i, "iqi terminal");
      }
    }
    run_metapath(ex.qiq, tr.seq_q, tr.qiq_mid, tr.qiq_term, tr.qiq, params, cfg);
    run_metapath(ex.iqi, tr.seq_i, tr.iqi_mid, tr.iqi_term, tr.iqi, params, cfg);
  }

  tr.fusion_in.clear();
  tr.fusion_in.reserve(static_cast<std::size_t>(cfg.fusion_input_dim()));
  if (cfg.components.rep) {
    tr.fusion_in.insert(tr.fusion_in.end(), tr.seq_q.value.begin(), tr.seq_q.value.end());
    tr.fusion_in.insert(tr.fusion_in.end(), tr.seq_i.value.begin(), tr.seq_i.value.end());
  }
  if (cfg.components.interaction) {
    tr.fusion_in.insert(tr.fusion_in.end(), tr.m_int.data(), tr.m_int.data() + tr.m_int.size());
  }
  if (cfg.components.hin) {
    if (tr.qiq.value.empty()) tr.qiq.value.assign(d, 0.0);
    if (tr.iqi.value.empty()) tr.iqi.value.assign(d, 0.0);
    tr.fusion_in.insert(tr.fusion_in.end(), tr.qiq.value.begin(), tr.qiq.value.end());
    tr.fusion_in.insert(tr.fusion_in.end(), tr.iqi.value.begin(), tr.iqi.value.end());
  }

  const auto h1 = static_cast<std::size_t>(cfg.h1);
  const auto h2 = static_cast<std::size_t>(cfg.h2);
  tr.z1.assign(h1, 0.0);
  tr.a1.assign(h1, 0.0);
  for (std::size_t r = 0; r < h1; ++r) {
    tr.z1[r] = params.b1[r] + dot(params.w1.row(r), tr.fusion_in);
    tr.a1[r] = tr.z1[r] > 0 ? tr.z1[r] : 0.0;
  }
  tr.z2.assign(h2, 0.0);
  tr.a2.assign(h2, 0.0);
  for (std::size_t r = 0; r < h2; ++r) {
    tr.z2[r] = params.b2[r] + dot(params.w2.row(r), tr.a1);
    tr.a2[r] = tr.z2[r] > 0 ? tr.z2[r] : 0.0;
  }
  tr.z3 = params.b3 + dot({params.w3.data(), h2}, tr.a2);
  tr.score = sigmoid(tr.z3);
  return ForwardResult{tr.score, std::move(tr)};
}

double bce_loss(double score, double label) {
  double s = std::clamp(score, kScoreEpsilon, 1.0 - kScoreEpsilon);
  return -(label * std::log(s) + (1.0 - label) * std::log(1.0 - s));
}

namespace {

// Routes a sequence-embedding gradient back to the word table (1/l per slot).
void distribute_seq_grad(Matrix& word_grads, const EncodedText& t,
                         std::span<const double> dseq) {
  if (t.true_len <= 0) return;
  double inv = 1.0 / static_cast<double>(t.true_len);
  for (int k = 0; k < t.true_len; ++k) {
    auto row = word_grads.row(static_cast<std::size_t>(t.ids[static_cast<std::size_t>(k)]));
    axpy(inv, dseq, row);
  }
}

struct MetapathBackpropResult {
  std::vector<double> d_central;
};

// Backprop through one metapath block: attention + mix + instance means.
// d_out is the gradient at the metapath embedding (post-activation).
MetapathBackpropResult metapath_backward(const MetapathTrace& mp,
                                         const std::array<EncodedInstance, 2>& encoded,
                                         const SeqEmbedding& central,
                                         std::span<const double> d_out,
                                         const ModelParams& params, const ModelConfig& cfg,
                                         ModelGrads& g, bool grad_word_emb) {
  const auto d = static_cast<std::size_t>(cfg.d);
  MetapathBackpropResult res;
  res.d_central.assign(d, 0.0);
  if (mp.all_padded) return res;

  std::vector<double> d_mix(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    d_mix[j] = d_out[j] * act_grad(cfg.activation, mp.mix[j], mp.value[j]);
  }

  std::array<std::vector<double>, 2> d_inst;
  std::array<double, 2> d_weight{0.0, 0.0};
  for (std::size_t k = 0; k < 2; ++k) {
    d_inst[k].assign(d, 0.0);
    if (mp.padded[k]) continue;
    axpy(mp.att_weight[k], d_mix, d_inst[k]);
    d_weight[k] = dot(d_mix, {mp.inst[k].data(), d});
  }

  // softmax over the unpadded set
  double weighted = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    if (!mp.padded[k]) weighted += mp.att_weight[k] * d_weight[k];
  }
  for (std::size_t k = 0; k < 2; ++k) {
    if (mp.padded[k]) continue;
    double d_logit = mp.att_weight[k] * (d_weight[k] - weighted);
    double d_pre = d_logit * act_grad(cfg.activation, mp.att_pre[k], mp.att_logit[k]);
    axpy(d_pre, {central.value.data(), d}, {g.w_att.data(), d});
    axpy(d_pre, {mp.inst[k].data(), d}, {g.w_att.data() + d, d});
    g.b_att += d_pre;
    axpy(d_pre, {params.w_att.data(), d}, res.d_central);
    axpy(d_pre, {params.w_att.data() + d, d}, d_inst[k]);
  }

  // instance mean: thirds to central / middle / terminal sequence embeddings
  for (std::size_t k = 0; k < 2; ++k) {
    if (mp.padded[k]) continue;
    std::vector<double> third(d);
    for (std::size_t j = 0; j < d; ++j) third[j] = d_inst[k][j] / 3.0;
    axpy(1.0, third, res.d_central);
    if (grad_word_emb) {
      distribute_seq_grad(g.word_emb, encoded[k].middle, third);
      distribute_seq_grad(g.word_emb, encoded[k].terminal, third);
    }
  }
  return res;
}

}  // namespace

ModelGrads backward(const ForwardTrace& tr, double label, const ModelParams& params,
                    const ModelConfig& cfg, bool grad_word_emb) {
  check_shapes(params, cfg);
  ModelGrads g = zero_grads(cfg, params, grad_word_emb);
  const auto d = static_cast<std::size_t>(cfg.d);
  const auto h1 = static_cast<std::size_t>(cfg.h1);
  const auto h2 = static_cast<std::size_t>(cfg.h2);

  // d(BCE)/d(z3) for a sigmoid output
  double dz3 = tr.score - label;
  for (std::size_t r = 0; r < h2; ++r) g.w3[r] = dz3 * tr.a2[r];
  g.b3 = dz3;

  std::vector<double> dz2(h2, 0.0);
  for (std::size_t r = 0; r < h2; ++r) {
    dz2[r] = tr.z2[r] > 0 ? dz3 * params.w3[r] : 0.0;
  }
  for (std::size_t r = 0; r < h2; ++r) {
    if (dz2[r] == 0.0) continue;
    axpy(dz2[r], tr.a1, g.w2.row(r));
    g.b2[r] = dz2[r];
  }

  std::vector<double> da1(h1, 0.0);
  for (std::size_t r = 0; r < h2; ++r) {
    if (dz2[r] != 0.0) axpy(dz2[r], params.w2.row(r), da1);
  }
  std::vector<double> dz1(h1, 0.0);
  for (std::size_t r = 0; r < h1; ++r) dz1[r] = tr.z1[r] > 0 ? da1[r] : 0.0;
  std::vector<double> dfus(tr.fusion_in.size(), 0.0);
  for (std::size_t r = 0; r < h1; ++r) {
    if (dz1[r] == 0.0) continue;
    axpy(dz1[r], tr.fusion_in, g.w1.row(r));
    g.b1[r] = dz1[r];
    axpy(dz1[r], params.w1.row(r), dfus);
  }

  std::vector<double> dseq_q(d, 0.0), dseq_i(d, 0.0);
  std::size_t off = 0;
  if (cfg.components.rep) {
    for (std::size_t j = 0; j < d; ++j) dseq_q[j] += dfus[off + j];
    off += d;
    for (std::size_t j = 0; j < d; ++j) dseq_i[j] += dfus[off + j];
    off += d;
  }
  if (cfg.components.interaction) {
    const auto li = static_cast<std::size_t>(cfg.l_i);
    for (int a = 0; a < tr.ex.query.true_len; ++a) {
      for (int b = 0; b < tr.ex.title.true_len; ++b) {
        double gij = dfus[off + static_cast<std::size_t>(a) * li + static_cast<std::size_t>(b)];
        if (gij == 0.0) continue;
        axpy(gij, tr.aug_i.row(static_cast<std::size_t>(b)),
             g.p_q.row(static_cast<std::size_t>(a)));
        axpy(gij, tr.aug_q.row(static_cast<std::size_t>(a)),
             g.p_i.row(static_cast<std::size_t>(b)));
        if (grad_word_emb) {
          axpy(gij, tr.aug_i.row(static_cast<std::size_t>(b)),
               g.word_emb.row(
                   static_cast<std::size_t>(tr.ex.query.ids[static_cast<std::size_t>(a)])));
          axpy(gij, tr.aug_q.row(static_cast<std::size_t>(a)),
               g.word_emb.row(
                   static_cast<std::size_t>(tr.ex.title.ids[static_cast<std::size_t>(b)])));
        }
      }
    }
    off += static_cast<std::size_t>(cfg.l_q) * li;
  }
  if (cfg.components.hin) {
    std::span<const double> d_qiq{dfus.data() + off, d};
    off += d;
    std::span<const double> d_iqi{dfus.data() + off, d};
    off += d;
    auto res_q = metapath_backward(tr.qiq, tr.ex.qiq, tr.seq_q, d_qiq, params, cfg, g,
                                   grad_word_emb);
    auto res_i = metapath_backward(tr.iqi, tr.ex.iqi, tr.seq_i, d_iqi, params, cfg, g,
                                   grad_word_emb);
    axpy(1.0, res_q.d_central, dseq_q);
    axpy(1.0, res_i.d_central, dseq_i);
  }

  if (grad_word_emb) {
    distribute_seq_grad(g.word_emb, tr.ex.query, dseq_q);
    distribute_seq_grad(g.word_emb, tr.ex.title, dseq_i);
    // PAD row never trains
    for (std::size_t j = 0; j < g.word_emb.cols(); ++j) {
      g.word_emb.at(static_cast<std::size_t>(text::kPadId), j) = 0.0;
    }
  }
  return g;
}

void save_checkpoint(const ModelParams& params, const ModelConfig& cfg,
                     const std::string& path) {
  check_shapes(params, cfg);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("checkpoint: cannot open for write: " + path);
  f << "#hg4sm-ckpt v1\n";
  f << "config d=" << cfg.d << " l_q=" << cfg.l_q << " l_i=" << cfg.l_i << " h1=" << cfg.h1
    << " h2=" << cfg.h2 << " components=" << components_name(cfg.components)
    << " activation=" << activation_name(cfg.activation)
    << " vocab_size=" << params.word_emb.rows() << '\n';
  char buf[64];
  auto& mut = const_cast<ModelParams&>(params);  // views are read-only here
  for (const auto& view : tensor_views(mut, /*include_word_emb=*/true)) {
    f << "tensor " << view.name << ' ' << view.rows << ' ' << view.cols << '\n';
    for (std::size_t r = 0; r < view.rows; ++r) {
      for (std::size_t c = 0; c < view.cols; ++c) {
        std::snprintf(buf, sizeof(buf), c == 0 ? "%.9g" : " %.9g", view.data[r * view.cols + c]);
        f << buf;
      }
      f << '\n';
    }
  }
  f << "end\n";
  if (!f) throw Error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("checkpoint: cannot open: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "#hg4sm-ckpt v1") {
    throw Error("bad checkpoint header");
  }
  if (!std::getline(f, line) || line.rfind("config ", 0) != 0) {
    throw Error("bad checkpoint header");
  }

  Checkpoint ck;
  std::size_t vocab_size = 0;
  {
    std::istringstream ls(line.substr(7));
    std::string kv;
    while (ls >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error("bad checkpoint header");
      std::string key = kv.substr(0, eq);
      std::string val = kv.substr(eq + 1);
      try {
        if (key == "d") ck.config.d = std::stoi(val);
        else if (key == "l_q") ck.config.l_q = std::stoi(val);
        else if (key == "l_i") ck.config.l_i = std::stoi(val);
        else if (key == "h1") ck.config.h1 = std::stoi(val);
        else if (key == "h2") ck.config.h2 = std::stoi(val);
        else if (key == "components") ck.config.components = parse_components(val);
        else if (key == "activation") ck.config.activation = parse_activation(val);
        else if (key == "vocab_size") vocab_size = static_cast<std::size_t>(std::stoull(val));
        else throw Error("bad checkpoint header");
      } catch (const Error&) {
        throw;
      } catch (const std::exception&) {
        throw Error("bad checkpoint header");
      }
    }
  }
  ck.config.validate();
  if (vocab_size < text::kReservedIds) throw Error("bad checkpoint header");

  const auto& cfg = ck.config;
  auto& p = ck.params;
  const auto d = static_cast<std::size_t>(cfg.d);
  p.p_q = Matrix(static_cast<std::size_t>(cfg.l_q), d);
  p.p_i = Matrix(static_cast<std::size_t>(cfg.l_i), d);
  p.w_att.assign(2 * d, 0.0);
  p.w1 = Matrix(static_cast<std::size_t>(cfg.h1),
                static_cast<std::size_t>(cfg.fusion_input_dim()));
  p.b1.assign(static_cast<std::size_t>(cfg.h1), 0.0);
  p.w2 = Matrix(static_cast<std::size_t>(cfg.h2), static_cast<std::size_t>(cfg.h1));
  p.b2.assign(static_cast<std::size_t>(cfg.h2), 0.0);
  p.w3.assign(static_cast<std::size_t>(cfg.h2), 0.0);
  p.word_emb = Matrix(vocab_size, d);

  for (auto& view : tensor_views(p, /*include_word_emb=*/true)) {
    if (!std::getline(f, line)) throw Error("checkpoint: truncated before " + view.name);
    std::istringstream hdr(line);
    std::string word, name;
    std::size_t rows = 0, cols = 0;
    hdr >> word >> name >> rows >> cols;
    if (word != "tensor" || name != view.name || rows != view.rows || cols != view.cols) {
      throw Error("checkpoint: unexpected tensor record '" + line + "'");
    }
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(f, line)) throw Error("checkpoint: truncated in " + view.name);
      std::istringstream ls(line);
      for (std::size_t c = 0; c < cols; ++c) {
        if (!(ls >> view.data[r * cols + c])) {
          throw Error("checkpoint: bad value in " + view.name);
        }
      }
    }
  }
  if (!std::getline(f, line) || line != "end") {
    throw Error("checkpoint: missing terminator");
  }
  return ck;
}

}  // namespace hg4sm::model
