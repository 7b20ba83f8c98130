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

#include "hg4sm/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "field_escape.hpp"
#include "hg4sm/error.hpp"

namespace hg4sm::graph {

using detail::escape_field;
using detail::split_tabs;
using detail::unescape_field;

namespace {

std::uint64_t pair_key(std::uint32_t q, std::uint32_t i) {
  return (static_cast<std::uint64_t>(q) << 32) | i;
}

std::string format_score(double s) {
  if (s < 0) return "-";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", s);
  return buf;
}

}  // namespace

double lexical_teacher_score(std::string_view query, std::string_view title,
                             const text::TokenizerConfig& cfg) {
  auto q_tokens = text::tokenize(query, cfg);
  if (q_tokens.empty()) return 0.0;
  std::unordered_set<std::string> q_set(q_tokens.begin(), q_tokens.end());
  std::unordered_set<std::string> t_set;
  for (auto& t : text::tokenize(title, cfg)) t_set.insert(std::move(t));
  std::size_t hit = 0;
  for (const auto& t : q_set) {
    if (t_set.count(t)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(q_set.size());
}

TeacherScoreCache TeacherScoreCache::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("teacher-cache: cannot open: " + path);
  TeacherScoreCache cache;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw Error("teacher-cache: line " + std::to_string(lineno) + ": expected 3 fields");
    }
    double s = 0.0;
    try {
      s = std::stod(fields[2]);
    } catch (const std::exception&) {
      throw Error("teacher-cache: line " + std::to_string(lineno) + ": bad score");
    }
    if (s < 0.0 || s > 1.0) {
      throw Error("teacher-cache: line " + std::to_string(lineno) + ": score outside [0,1]");
    }
    cache.put(fields[0], fields[1], s);
  }
  return cache;
}

void TeacherScoreCache::put(std::string_view query, std::string_view item_id, double score) {
  std::string key;
  key.reserve(query.size() + item_id.size() + 1);
  key.append(query);
  key.push_back('\x1f');
  key.append(item_id);
  scores_[std::move(key)] = score;
}

std::optional<double> TeacherScoreCache::find(std::string_view query,
                                              std::string_view item_id) const {
  std::string key;
  key.reserve(query.size() + item_id.size() + 1);
  key.append(query);
  key.push_back('\x1f');
  key.append(item_id);
  auto it = scores_.find(key);
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

const std::string& BipartiteGraph::query_text(std::uint32_t id) const {
  if (id >= query_texts_.size()) throw Error("graph: unknown query node");
  return query_texts_[id];
}

const std::string& BipartiteGraph::item_title(std::uint32_t id) const {
  if (id >= item_titles_.size()) throw Error("graph: unknown item node");
  return item_titles_[id];
}

const std::string& BipartiteGraph::item_external_id(std::uint32_t id) const {
  if (id >= item_external_ids_.size()) throw Error("graph: unknown item node");
  return item_external_ids_[id];
}

const std::string& BipartiteGraph::text_of(NodeRef n) const {
  return n.kind == NodeKind::Query ? query_text(n.id) : item_title(n.id);
}

std::optional<NodeRef> BipartiteGraph::find_query(std::string_view t) const {
  auto it = query_by_text_.find(std::string(t));
  if (it == query_by_text_.end()) return std::nullopt;
  return NodeRef{NodeKind::Query, it->second};
}

std::optional<NodeRef> BipartiteGraph::find_item(std::string_view external_id) const {
  auto it = item_by_external_id_.find(std::string(external_id));
  if (it == item_by_external_id_.end()) return std::nullopt;
  return NodeRef{NodeKind::Item, it->second};
}

std::optional<NodeRef> BipartiteGraph::find_item_by_title(std::string_view title) const {
  std::optional<std::uint32_t> best;
  for (std::uint32_t id = 0; id < item_titles_.size(); ++id) {
    if (item_titles_[id] == title) {
      best = id;
      break;
    }
  }
  if (!best) return std::nullopt;
  return NodeRef{NodeKind::Item, *best};
}

const Edge* BipartiteGraph::find_edge(std::uint32_t q, std::uint32_t i) const {
  auto it = edge_index_.find(pair_key(q, i));
  return it == edge_index_.end() ? nullptr : &edges_[it->second];
}

bool BipartiteGraph::has_edge(NodeRef u, NodeRef v) const {
  if (u.kind == v.kind) return false;
  NodeRef q = u.kind == NodeKind::Query ? u : v;
  NodeRef i = u.kind == NodeKind::Item ? u : v;
  return find_edge(q.id, i.id) != nullptr;
}

std::vector<NodeRef> BipartiteGraph::neighbors(NodeRef n) const {
  std::vector<NodeRef> out;
  if (n.kind == NodeKind::Query) {
    if (n.id >= query_adj_.size()) throw Error("graph: unknown query node");
    for (auto e : query_adj_[n.id]) out.push_back({NodeKind::Item, edges_[e].item_id});
  } else {
    if (n.id >= item_adj_.size()) throw Error("graph: unknown item node");
    for (auto e : item_adj_[n.id]) out.push_back({NodeKind::Query, edges_[e].query_id});
  }
  return out;
}

std::size_t BipartiteGraph::degree(NodeRef n) const {
  if (n.kind == NodeKind::Query) {
    if (n.id >= query_adj_.size()) throw Error("graph: unknown query node");
    return query_adj_[n.id].size();
  }
  if (n.id >= item_adj_.size()) throw Error("graph: unknown item node");
  return item_adj_[n.id].size();
}

const std::vector<std::uint32_t>& BipartiteGraph::ranked_adjacency(NodeRef n) const {
  if (!refined_) throw Error("graph: neighbor ranking requires a refined graph");
  if (n.kind == NodeKind::Query) {
    if (n.id >= query_ranked_.size()) throw Error("graph: unknown query node");
    return query_ranked_[n.id];
  }
  if (n.id >= item_ranked_.size()) throw Error("graph: unknown item node");
  return item_ranked_[n.id];
}

std::vector<NodeRef> BipartiteGraph::rank_neighbors(NodeRef n) const {
  const auto& ids = ranked_adjacency(n);
  NodeKind other = n.kind == NodeKind::Query ? NodeKind::Item : NodeKind::Query;
  std::vector<NodeRef> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back({other, id});
  return out;
}

std::vector<NodeRef> BipartiteGraph::sample_top_neighbors(NodeRef n, int k) const {
  if (k < 1) throw Error("graph: k must be >= 1");
  auto ranked = rank_neighbors(n);
  if (ranked.size() > static_cast<std::size_t>(k)) {
    ranked.resize(static_cast<std::size_t>(k));
  }
  return ranked;
}

std::uint32_t BipartiteGraph::intern_query(std::string_view t) {
  auto it = query_by_text_.find(std::string(t));
  if (it != query_by_text_.end()) return it->second;
  std::uint32_t id = static_cast<std::uint32_t>(query_texts_.size());
  query_texts_.emplace_back(t);
  query_by_text_.emplace(std::string(t), id);
  query_adj_.emplace_back();
  return id;
}

std::uint32_t BipartiteGraph::intern_item(std::string_view external_id, std::string_view title) {
  auto it = item_by_external_id_.find(std::string(external_id));
  if (it != item_by_external_id_.end()) {
    if (item_titles_[it->second] != title) {
      throw Error("graph: item '" + std::string(external_id) + "' has conflicting titles");
    }
    return it->second;
  }
  std::uint32_t id = static_cast<std::uint32_t>(item_titles_.size());
  item_titles_.emplace_back(title);
  item_external_ids_.emplace_back(external_id);
  item_by_external_id_.emplace(std::string(external_id), id);
  item_adj_.emplace_back();
  return id;
}

void BipartiteGraph::add_edge(Edge e) {
  std::uint32_t idx = static_cast<std::uint32_t>(edges_.size());
  edge_index_.emplace(pair_key(e.query_id, e.item_id), idx);
  query_adj_[e.query_id].push_back(idx);
  item_adj_[e.item_id].push_back(idx);
  edges_.push_back(e);
}

void BipartiteGraph::rebuild_rank_cache() {
  auto rank_key = [this](const Edge& e, std::uint32_t neighbor_id) {
    return std::make_tuple(-e.purchases, -e.clicks,
                           e.provenance == Provenance::TeacherAdded ? 1 : 0, neighbor_id);
  };
  query_ranked_.assign(query_texts_.size(), {});
  for (std::uint32_t q = 0; q < query_adj_.size(); ++q) {
    auto idxs = query_adj_[q];
    std::sort(idxs.begin(), idxs.end(), [&](std::uint32_t a, std::uint32_t b) {
      return rank_key(edges_[a], edges_[a].item_id) < rank_key(edges_[b], edges_[b].item_id);
    });
    for (auto e : idxs) query_ranked_[q].push_back(edges_[e].item_id);
  }
  item_ranked_.assign(item_titles_.size(), {});
  for (std::uint32_t i = 0; i < item_adj_.size(); ++i) {
    auto idxs = item_adj_[i];
    std::sort(idxs.begin(), idxs.end(), [&](std::uint32_t a, std::uint32_t b) {
      return rank_key(edges_[a], edges_[a].query_id) < rank_key(edges_[b], edges_[b].query_id);
    });
    for (auto e : idxs) item_ranked_[i].push_back(edges_[e].query_id);
  }
}

void BipartiteGraph::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("graph: cannot open for write: " + path);
  save(f);
  if (!f) throw Error("graph: write failed: " + path);
}

void BipartiteGraph::save(std::ostream& out) const {
  out << "#hg4sm-graph v1\n";
  out << "refined " << (refined_ ? 1 : 0) << '\n';
  out << "queries " << query_texts_.size() << '\n';
  for (const auto& t : query_texts_) out << escape_field(t) << '\n';
  out << "items " << item_titles_.size() << '\n';
  for (std::size_t i = 0; i < item_titles_.size(); ++i) {
    out << escape_field(item_external_ids_[i]) << '\t' << escape_field(item_titles_[i]) << '\n';
  }
  out << "edges " << edges_.size() << '\n';
  for (const auto& e : edges_) {
    out << e.query_id << '\t' << e.item_id << '\t' << e.clicks << '\t' << e.purchases << '\t'
        << (e.provenance == Provenance::Logged ? "logged" : "teacher") << '\t'
        << format_score(e.teacher_score) << '\n';
  }
  out << "candidates " << candidates_.size() << '\n';
  for (const auto& [q, i] : candidates_) out << q << '\t' << i << '\n';
  out << "end\n";
}

BipartiteGraph BipartiteGraph::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("graph: cannot open: " + path);
  return load(f);
}

BipartiteGraph BipartiteGraph::load(std::istream& in) {
  std::string line;
  auto next = [&](const char* what) -> std::string& {
    if (!std::getline(in, line)) throw Error(std::string("graph: truncated snapshot at ") + what);
    return line;
  };
  if (next("header") != "#hg4sm-graph v1") throw Error("graph: bad snapshot header");

  auto read_count = [&](const char* section) -> std::size_t {
    std::istringstream ls(next(section));
    std::string name;
    std::size_t n = 0;
    ls >> name >> n;
    if (name != section || ls.fail()) {
      throw Error(std::string("graph: expected section '") + section + "'");
    }
    return n;
  };

  BipartiteGraph g;
  {
    std::istringstream ls(next("refined"));
    std::string name;
    int v = 0;
    ls >> name >> v;
    if (name != "refined" || ls.fail()) throw Error("graph: expected 'refined' line");
    g.refined_ = v != 0;
  }
  std::size_t nq = read_count("queries");
  for (std::size_t k = 0; k < nq; ++k) {
    g.intern_query(unescape_field(next("query row")));
  }
  std::size_t ni = read_count("items");
  for (std::size_t k = 0; k < ni; ++k) {
    auto fields = split_tabs(next("item row"));
    if (fields.size() != 2) throw Error("graph: malformed item row");
    g.intern_item(unescape_field(fields[0]), unescape_field(fields[1]));
  }
  std::size_t ne = read_count("edges");
  for (std::size_t k = 0; k < ne; ++k) {
    auto fields = split_tabs(next("edge row"));
    if (fields.size() != 6) throw Error("graph: malformed edge row");
    Edge e;
    try {
      e.query_id = static_cast<std::uint32_t>(std::stoul(fields[0]));
      e.item_id = static_cast<std::uint32_t>(std::stoul(fields[1]));
      e.clicks = std::stoll(fields[2]);
      e.purchases = std::stoll(fields[3]);
      e.teacher_score = fields[5] == "-" ? -1.0 : std::stod(fields[5]);
    } catch (const std::exception&) {
      throw Error("graph: malformed edge row");
    }
    if (fields[4] == "logged") {
      e.provenance = Provenance::Logged;
    } else if (fields[4] == "teacher") {
      e.provenance = Provenance::TeacherAdded;
    } else {
      throw Error("graph: malformed edge provenance");
    }
    if (e.query_id >= g.query_texts_.size() || e.item_id >= g.item_titles_.size()) {
      throw Error("graph: edge references unknown node");
    }
    g.add_edge(e);
  }
  std::size_t nc = read_count("candidates");
  for (std::size_t k = 0; k < nc; ++k) {
    auto fields = split_tabs(next("candidate row"));
    if (fields.size() != 2) throw Error("graph: malformed candidate row");
    try {
      g.candidates_.emplace_back(static_cast<std::uint32_t>(std::stoul(fields[0])),
                                 static_cast<std::uint32_t>(std::stoul(fields[1])));
    } catch (const std::exception&) {
      throw Error("graph: malformed candidate row");
    }
  }
  if (next("end") != "end") throw Error("graph: missing snapshot terminator");
  if (g.refined_) g.rebuild_rank_cache();
  return g;
}

BipartiteGraph build_behavior_graph(std::span<const LogRecord> records) {
  BipartiteGraph g;
  // Aggregate counters per (query,item) pair; node ids follow first appearance.
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<std::int64_t, std::int64_t>> pairs;
  for (const auto& rec : records) {
    if (rec.query.empty()) throw Error("log: empty query");
    if (rec.item_id.empty()) throw Error("log: empty item_id");
    if (rec.title.empty()) throw Error("log: empty title");
    if (rec.clicks < 0 || rec.purchases < 0 || rec.impressions < 0) {
      throw Error("log: negative counter");
    }
    std::uint32_t q = g.intern_query(rec.query);
    std::uint32_t i = g.intern_item(rec.item_id, rec.title);
    auto& agg = pairs[{q, i}];
    agg.first += rec.clicks;
    agg.second += rec.purchases;
  }
  for (const auto& [key, agg] : pairs) {
    if (agg.first + agg.second >= 1) {
      Edge e;
      e.query_id = key.first;
      e.item_id = key.second;
      e.clicks = agg.first;
      e.purchases = agg.second;
      g.add_edge(e);
    } else {
      g.candidates_.emplace_back(key.first, key.second);
    }
  }
  return g;
}

BipartiteGraph build_behavior_graph(std::istream& jsonl) {
  return build_behavior_graph(parse_log_jsonl(jsonl));
}

std::vector<LogRecord> parse_log_jsonl(std::istream& in) {
  std::vector<LogRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("log: line " + std::to_string(lineno) + ": " + e.what());
    }
    LogRecord rec;
    try {
      rec.query = j.at("query").get<std::string>();
      rec.item_id = j.at("item_id").get<std::string>();
      rec.title = j.at("title").get<std::string>();
      rec.clicks = j.value("clicks", std::int64_t{0});
      rec.purchases = j.value("purchases", std::int64_t{0});
      rec.impressions = j.value("impressions", std::int64_t{0});
    } catch (const nlohmann::json::exception& e) {
      throw Error("log: line " + std::to_string(lineno) + ": " + e.what());
    }
    if (rec.query.empty() || rec.item_id.empty() || rec.title.empty() || rec.clicks < 0 ||
        rec.purchases < 0 || rec.impressions < 0) {
      throw Error("log: line " + std::to_string(lineno) + ": invalid record");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_log_jsonl(std::span<const LogRecord> records, std::ostream& out) {
  for (const auto& rec : records) {
    nlohmann::json j{{"query", rec.query},       {"item_id", rec.item_id},
                     {"title", rec.title},       {"clicks", rec.clicks},
                     {"purchases", rec.purchases}, {"impressions", rec.impressions}};
    out << j.dump() << '\n';
  }
}

BipartiteGraph refine_with_teacher(const BipartiteGraph& g, const TeacherOracle& teacher,
                                   double alpha, double beta, const TeacherScoreCache* cache,
                                   std::size_t candidate_cap_per_query) {
  if (alpha < 0.0 || alpha > 1.0 || beta < 0.0 || beta > 1.0) {
    throw Error("refine: alpha and beta must be in [0,1]");
  }
  if (g.refined()) throw Error("refine: graph already refined");

  BipartiteGraph r;
  r.query_texts_ = g.query_texts_;
  r.item_titles_ = g.item_titles_;
  r.item_external_ids_ = g.item_external_ids_;
  r.query_by_text_ = g.query_by_text_;
  r.item_by_external_id_ = g.item_by_external_id_;
  r.query_adj_.assign(r.query_texts_.size(), {});
  r.item_adj_.assign(r.item_titles_.size(), {});
  r.candidates_ = g.candidates_;

  auto score_pair = [&](std::uint32_t q, std::uint32_t i) {
    if (cache) {
      if (auto s = cache->find(g.query_texts_[q], g.item_external_ids_[i])) return *s;
    }
    return teacher.score(g.query_texts_[q], g.item_titles_[i]);
  };

  std::vector<Edge> kept;
  for (const auto& e : g.edges_) {
    if (e.purchases >= 1) {
      kept.push_back(e);  // purchase behavior is retained unconditionally
      continue;
    }
    double s = score_pair(e.query_id, e.item_id);
    if (s >= alpha) {
      Edge scored = e;
      scored.teacher_score = s;
      kept.push_back(scored);
    }
  }

  // Candidate pairs, grouped per query and capped in item-id order.
  std::map<std::uint32_t, std::vector<std::uint32_t>> pool;
  for (const auto& [q, i] : g.candidates_) pool[q].push_back(i);
  for (auto& [q, items] : pool) {
    std::sort(items.begin(), items.end());
    if (items.size() > candidate_cap_per_query) items.resize(candidate_cap_per_query);
    for (auto i : items) {
      double s = score_pair(q, i);
      if (s >= beta) {
        Edge e;
        e.query_id = q;
        e.item_id = i;
        e.provenance = Provenance::TeacherAdded;
        e.teacher_score = s;
        kept.push_back(e);
      }
    }
  }

  std::sort(kept.begin(), kept.end(), [](const Edge& a, const Edge& b) {
    return std::make_pair(a.query_id, a.item_id) < std::make_pair(b.query_id, b.item_id);
  });
  for (const auto& e : kept) r.add_edge(e);

  r.refined_ = true;
  r.rebuild_rank_cache();
  return r;
}

namespace {

void check_node(const BipartiteGraph& g, NodeRef n) {
  if (n.kind == NodeKind::Query) {
    if (n.id >= g.query_count()) throw Error("graph: unknown query node");
  } else {
    if (n.id >= g.item_count()) throw Error("graph: unknown item node");
  }
}

std::array<MetapathInstance, 2> side_instances(const BipartiteGraph& g, NodeRef anchor,
                                               std::optional<NodeRef> exclude_middle,
                                               std::optional<NodeRef> exclude_terminal) {
  check_node(g, anchor);
  std::array<MetapathInstance, 2> out;

  std::optional<NodeRef> middle;
  for (auto n : g.rank_neighbors(anchor)) {
    if (exclude_middle && n == *exclude_middle) continue;
    middle = n;
    break;
  }
  if (!middle) return out;

  int slot = 0;
  for (auto n : g.rank_neighbors(*middle)) {
    if (exclude_terminal && n == *exclude_terminal) continue;
    out[static_cast<std::size_t>(slot)] = {*middle, n, false};
    if (++slot == 2) break;
  }
  return out;
}

}  // namespace

std::array<MetapathInstance, 2> qiq_instances(const BipartiteGraph& g, NodeRef q,
                                              std::optional<NodeRef> exclude_item,
                                              std::optional<NodeRef> exclude_query) {
  if (q.kind != NodeKind::Query) throw Error("graph: Q-I-Q anchor must be a query");
  return side_instances(g, q, exclude_item, exclude_query);
}

std::array<MetapathInstance, 2> iqi_instances(const BipartiteGraph& g, NodeRef i,
                                              std::optional<NodeRef> exclude_query,
                                              std::optional<NodeRef> exclude_item) {
  if (i.kind != NodeKind::Item) throw Error("graph: I-Q-I anchor must be an item");
  return side_instances(g, i, exclude_query, exclude_item);
}

MetapathContext extract_metapath_context(const BipartiteGraph& g, NodeRef q, NodeRef i,
                                         bool exclude_focus_edge) {
  if (q.kind != NodeKind::Query || i.kind != NodeKind::Item) {
    throw Error("graph: metapath context needs a (query, item) focus pair");
  }
  check_node(g, q);
  check_node(g, i);
  std::optional<NodeRef> ex_q, ex_i;
  if (exclude_focus_edge) {
    ex_q = q;
    ex_i = i;
  }
  MetapathContext ctx;
  ctx.qiq = qiq_instances(g, q, ex_i, ex_q);
  ctx.iqi = iqi_instances(g, i, ex_q, ex_i);
  return ctx;
}

int first_order_proximity(const BipartiteGraph& g, NodeRef u, NodeRef v) {
  check_node(g, u);
  check_node(g, v);
  return g.has_edge(u, v) ? 1 : 0;
}

double second_order_proximity(const BipartiteGraph& g, NodeRef u, NodeRef v) {
  check_node(g, u);
  check_node(g, v);
  if (u.kind != v.kind) {
    throw Error("graph: second-order proximity needs two nodes of the same kind");
  }
  auto ids_of = [&](NodeRef n) {
    std::vector<std::uint32_t> ids;
    for (auto nb : g.neighbors(n)) ids.push_back(nb.id);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  auto a = ids_of(u);
  auto b = ids_of(v);
  std::size_t inter = 0, ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    if (a[ia] == b[ib]) {
      ++inter;
      ++ia;
      ++ib;
    } else if (a[ia] < b[ib]) {
      ++ia;
    } else {
      ++ib;
    }
  }
  std::size_t uni = a.size() + b.size() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace hg4sm::graph
