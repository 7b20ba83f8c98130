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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hg4sm/textproc.hpp"

namespace hg4sm::graph {

enum class NodeKind : std::uint8_t { Query, Item };

struct NodeRef {
  NodeKind kind;
  std::uint32_t id;
  bool operator==(const NodeRef&) const = default;
};

enum class Provenance : std::uint8_t { Logged, TeacherAdded };

struct Edge {
  std::uint32_t query_id = 0;
  std::uint32_t item_id = 0;
  std::int64_t clicks = 0;
  std::int64_t purchases = 0;
  Provenance provenance = Provenance::Logged;
  double teacher_score = -1.0;  // >= 0 only when a teacher scored the pair

  bool operator==(const Edge&) const = default;
};

// One search-log line: behavioral counters for a (query, item) impression.
struct LogRecord {
  std::string query;
  std::string item_id;
  std::string title;
  std::int64_t clicks = 0;
  std::int64_t purchases = 0;
  std::int64_t impressions = 0;
};

// External relevance scorer used to refine click edges. Deterministic per
// (query, title) pair.
class TeacherOracle {
 public:
  virtual ~TeacherOracle() = default;
  virtual double score(std::string_view query, std::string_view title) const = 0;
};

// Reference oracle: fraction of the query's distinct tokens present in the
// title. 0 for an empty query token set.
double lexical_teacher_score(std::string_view query, std::string_view title,
                             const text::TokenizerConfig& cfg = {});

class LexicalTeacher final : public TeacherOracle {
 public:
  explicit LexicalTeacher(text::TokenizerConfig cfg = {}) : cfg_(std::move(cfg)) {}
  double score(std::string_view query, std::string_view title) const override {
    return lexical_teacher_score(query, title, cfg_);
  }

 private:
  text::TokenizerConfig cfg_;
};

// Optional precomputed scores, TSV query<TAB>item_id<TAB>score. When present
// for a pair it overrides the oracle.
class TeacherScoreCache {
 public:
  static TeacherScoreCache load(const std::string& path);
  void put(std::string_view query, std::string_view item_id, double score);
  std::optional<double> find(std::string_view query, std::string_view item_id) const;
  std::size_t size() const { return scores_.size(); }

 private:
  std::unordered_map<std::string, double> scores_;  // key: query \x1f item_id
};

// Query-item bipartite behavior network. Immutable once refined; all read
// paths are then safe to share across threads.
class BipartiteGraph {
 public:
  BipartiteGraph() = default;

  std::size_t query_count() const { return query_texts_.size(); }
  std::size_t item_count() const { return item_titles_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool refined() const { return refined_; }

  const std::string& query_text(std::uint32_t id) const;
  const std::string& item_title(std::uint32_t id) const;
  const std::string& item_external_id(std::uint32_t id) const;
  const std::string& text_of(NodeRef n) const;

  std::optional<NodeRef> find_query(std::string_view text) const;
  std::optional<NodeRef> find_item(std::string_view external_id) const;
  // First (lowest-id) item whose title matches; cold-start path for predict.
  std::optional<NodeRef> find_item_by_title(std::string_view title) const;

  const std::vector<Edge>& edges() const { return edges_; }
  const Edge* find_edge(std::uint32_t query_id, std::uint32_t item_id) const;
  bool has_edge(NodeRef u, NodeRef v) const;

  // Impression-only pairs, the candidate pool for teacher-added edges.
  const std::vector<std::pair<std::uint32_t, std::uint32_t>>& candidates() const {
    return candidates_;
  }

  // Adjacent nodes (always the opposite kind), adjacency order.
  std::vector<NodeRef> neighbors(NodeRef n) const;
  std::size_t degree(NodeRef n) const;

  // Neighbor priority "purchase -> high click -> low click"; teacher-added
  // edges sort after all logged ones, node id breaks remaining ties.
  // Requires a refined graph.
  std::vector<NodeRef> rank_neighbors(NodeRef n) const;
  std::vector<NodeRef> sample_top_neighbors(NodeRef n, int k) const;

  // Versioned snapshot, lossless and byte-stable for a given graph.
  void save(const std::string& path) const;
  void save(std::ostream& out) const;
  static BipartiteGraph load(const std::string& path);
  static BipartiteGraph load(std::istream& in);

 private:
  friend BipartiteGraph build_behavior_graph(std::span<const LogRecord> records);
  friend BipartiteGraph refine_with_teacher(const BipartiteGraph&, const TeacherOracle&,
                                            double, double, const TeacherScoreCache*,
                                            std::size_t);

  std::uint32_t intern_query(std::string_view text);
  std::uint32_t intern_item(std::string_view external_id, std::string_view title);
  void add_edge(Edge e);
  void rebuild_rank_cache();
  const std::vector<std::uint32_t>& ranked_adjacency(NodeRef n) const;

  std::vector<std::string> query_texts_;
  std::vector<std::string> item_titles_;
  std::vector<std::string> item_external_ids_;
  std::unordered_map<std::string, std::uint32_t> query_by_text_;
  std::unordered_map<std::string, std::uint32_t> item_by_external_id_;

  std::vector<Edge> edges_;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_index_;  // (q<<32|i) -> idx
  std::vector<std::vector<std::uint32_t>> query_adj_;  // edge indices per query
  std::vector<std::vector<std::uint32_t>> item_adj_;   // edge indices per item

  std::vector<std::pair<std::uint32_t, std::uint32_t>> candidates_;
  bool refined_ = false;

  // Built when the graph becomes refined: neighbor ids in rank order.
  std::vector<std::vector<std::uint32_t>> query_ranked_;
  std::vector<std::vector<std::uint32_t>> item_ranked_;
};

// One node per distinct query text / item id, counters summed per pair;
// zero-count records become refinement candidates instead of edges.
BipartiteGraph build_behavior_graph(std::span<const LogRecord> records);

// Same, from a JSON-lines stream; malformed lines report their line number.
BipartiteGraph build_behavior_graph(std::istream& jsonl);

std::vector<LogRecord> parse_log_jsonl(std::istream& in);
void write_log_jsonl(std::span<const LogRecord> records, std::ostream& out);

inline constexpr std::size_t kDefaultCandidateCapPerQuery = 64;

// Teacher-knowledge refinement: purchase edges survive unconditionally,
// click-only edges need score >= alpha, impression candidates with
// score >= beta become TeacherAdded edges. Candidate pools larger than
// `candidate_cap_per_query` are truncated in item-id order.
BipartiteGraph refine_with_teacher(const BipartiteGraph& g, const TeacherOracle& teacher,
                                   double alpha, double beta,
                                   const TeacherScoreCache* cache = nullptr,
                                   std::size_t candidate_cap_per_query =
                                       kDefaultCandidateCapPerQuery);

struct MetapathInstance {
  NodeRef middle{NodeKind::Item, 0};
  NodeRef terminal{NodeKind::Query, 0};
  bool padded = true;
};

// Up to two instances per metapath for a focus (q, i) pair.
struct MetapathContext {
  std::array<MetapathInstance, 2> qiq;  // middle: item, terminal: query
  std::array<MetapathInstance, 2> iqi;  // middle: query, terminal: item
};

// Q-I-Q side anchored at q: middle = top-ranked item neighbor (optionally
// skipping `exclude_item`), terminals = its top-2 query neighbors
// (optionally skipping `exclude_query`).
std::array<MetapathInstance, 2> qiq_instances(const BipartiteGraph& g, NodeRef q,
                                              std::optional<NodeRef> exclude_item,
                                              std::optional<NodeRef> exclude_query);
std::array<MetapathInstance, 2> iqi_instances(const BipartiteGraph& g, NodeRef i,
                                              std::optional<NodeRef> exclude_query,
                                              std::optional<NodeRef> exclude_item);

MetapathContext extract_metapath_context(const BipartiteGraph& g, NodeRef q, NodeRef i,
                                         bool exclude_focus_edge);

// Edge indicator.
int first_order_proximity(const BipartiteGraph& g, NodeRef u, NodeRef v);

// Neighbor-set Jaccard for two same-kind nodes; 0 on an empty union.
double second_order_proximity(const BipartiteGraph& g, NodeRef u, NodeRef v);

}  // namespace hg4sm::graph
