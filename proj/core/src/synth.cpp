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

#include "hg4sm/synth.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <unordered_set>

#include "field_escape.hpp"
#include "hg4sm/error.hpp"

namespace hg4sm::synth {

namespace {

double canonical(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool bernoulli(std::mt19937_64& rng, double p) { return canonical(rng) < p; }

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

void append_cjk(std::string& out, char32_t cp) {
  out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
  out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
  out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
}

bool is_ascii_alnum_char(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z');
}

// Space only where two ASCII runs would otherwise merge; CJK tokens join
// directly so the mixed-script tokenizer path gets exercised.
std::string render(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (k > 0 && is_ascii_alnum_char(out.back()) && is_ascii_alnum_char(tokens[k].front())) {
      out.push_back(' ');
    }
    out += tokens[k];
  }
  return out;
}

struct ItemDef {
  std::string external_id;
  std::vector<std::string> tokens;
  int category;
  bool gap;
};

struct QueryDef {
  std::string text;
  std::vector<std::string> tokens;
  int category;
};

bool shares_token(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  for (const auto& x : a) {
    for (const auto& y : b) {
      if (x == y) return true;
    }
  }
  return false;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_categories < 2) throw Error("synth: need at least 2 categories");
  if (queries_per_category < 1 || items_per_category < 1 || vocab_per_category < 4 ||
      synonym_vocab_per_category < 4) {
    throw Error("synth: counts too small");
  }
  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(noise_click_rate) || !rate_ok(purchase_rate) || !rate_ok(impression_rate) ||
      !rate_ok(gap_fraction)) {
    throw Error("synth: rates must be in [0,1]");
  }
  if (eval_pos_per_query < 1 || eval_neg_per_query < 1) {
    throw Error("synth: eval pair counts must be >= 1");
  }
}

SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int C = cfg.n_categories;
  const int QPC = cfg.queries_per_category;

  // ---- token pools (globally disjoint; ~half ASCII runs, half CJK chars) ----
  char32_t next_cjk = 0x4E00;
  auto make_pool = [&](int cat, const char* tag, int size) {
    std::vector<std::string> pool;
    pool.reserve(static_cast<std::size_t>(size));
    for (int j = 0; j < size; ++j) {
      if (j % 2 == 0) {
        pool.push_back(std::string(tag) + std::to_string(cat) + "x" + std::to_string(j));
      } else {
        std::string tok;
        append_cjk(tok, next_cjk++);
        pool.push_back(std::move(tok));
      }
    }
    return pool;
  };
  std::vector<std::vector<std::string>> main_pool;
  for (int c = 0; c < C; ++c) {
    main_pool.push_back(make_pool(c, "w", cfg.vocab_per_category));
  }
  // One shared synonym pool for every category: lexical-gap titles must not
  // identify their category through text alone, otherwise first-order models
  // could decode them and the pairs would not be second-order-only.
  std::vector<std::string> syn_pool = make_pool(0, "s", C * cfg.synonym_vocab_per_category);

  // ---- queries (distinct texts) ----
  std::vector<QueryDef> queries;
  std::unordered_set<std::string> used_query_texts;
  for (int c = 0; c < C; ++c) {
    for (int k = 0; k < QPC; ++k) {
      QueryDef q;
      q.category = c;
      for (int tries = 0; tries < 1000; ++tries) {
        q.tokens.clear();
        int n_tok = 2 + static_cast<int>(rng() % 2);
        std::vector<std::size_t> picked;
        while (static_cast<int>(picked.size()) < n_tok) {
          std::size_t t = pick(rng, main_pool[static_cast<std::size_t>(c)].size());
          if (std::find(picked.begin(), picked.end(), t) == picked.end()) picked.push_back(t);
        }
        for (auto t : picked) q.tokens.push_back(main_pool[static_cast<std::size_t>(c)][t]);
        q.text = render(q.tokens);
        if (used_query_texts.insert(q.text).second) break;
      }
      queries.push_back(std::move(q));
    }
  }
  const std::size_t n_queries = queries.size();

  // ---- gap budget: exactly floor(gap_fraction * total positives), spread
  //      near-uniformly over categories ----
  const std::size_t total_pos = n_queries * static_cast<std::size_t>(cfg.eval_pos_per_query);
  const std::size_t total_gap =
      static_cast<std::size_t>(cfg.gap_fraction * static_cast<double>(total_pos));
  std::vector<std::size_t> gap_per_cat(static_cast<std::size_t>(C), total_gap / C);
  for (std::size_t c = 0; c < total_gap % C; ++c) ++gap_per_cat[c];
  for (int c = 0; c < C; ++c) {
    auto g = gap_per_cat[static_cast<std::size_t>(c)];
    if (g > static_cast<std::size_t>(QPC) * static_cast<std::size_t>(cfg.eval_pos_per_query)) {
      throw Error("synth: gap fraction too large for queries_per_category");
    }
    if (g + static_cast<std::size_t>(cfg.eval_pos_per_query) >
        static_cast<std::size_t>(cfg.items_per_category)) {
      throw Error("synth: items_per_category too small for gap fraction");
    }
  }

  // ---- items: first gap_per_cat[c] are gap items (synonym titles) ----
  std::vector<ItemDef> items;
  std::vector<std::vector<std::size_t>> cat_items(static_cast<std::size_t>(C));
  std::vector<std::vector<std::size_t>> cat_normal(static_cast<std::size_t>(C));
  std::vector<std::vector<std::size_t>> cat_gap(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    for (int k = 0; k < cfg.items_per_category; ++k) {
      ItemDef it;
      it.category = c;
      it.gap = static_cast<std::size_t>(k) < gap_per_cat[static_cast<std::size_t>(c)];
      it.external_id = "i" + std::to_string(c) + "_" + (it.gap ? "g" : "n") + std::to_string(k);
      const auto& pool = it.gap ? syn_pool : main_pool[static_cast<std::size_t>(c)];
      int n_tok = 4 + static_cast<int>(rng() % 3);
      for (int t = 0; t < n_tok; ++t) it.tokens.push_back(pool[pick(rng, pool.size())]);
      std::size_t idx = items.size();
      items.push_back(std::move(it));
      cat_items[static_cast<std::size_t>(c)].push_back(idx);
      (items[idx].gap ? cat_gap : cat_normal)[static_cast<std::size_t>(c)].push_back(idx);
    }
  }

  // ---- eval slots: per category shuffle (query, slot) pairs; the first
  //      gap_per_cat get the category's gap items one-to-one ----
  struct PosSlot {
    std::size_t query;
    std::size_t item;
    bool gap;
  };
  std::vector<std::vector<PosSlot>> pos_slots_per_query(n_queries);
  for (int c = 0; c < C; ++c) {
    std::vector<std::pair<std::size_t, int>> slots;  // (query idx, slot no)
    for (int k = 0; k < QPC; ++k) {
      std::size_t qidx = static_cast<std::size_t>(c) * static_cast<std::size_t>(QPC) +
                         static_cast<std::size_t>(k);
      for (int s = 0; s < cfg.eval_pos_per_query; ++s) slots.emplace_back(qidx, s);
    }
    for (std::size_t i = slots.size(); i > 1; --i) {
      std::swap(slots[i - 1], slots[rng() % i]);
    }
    const auto& gaps = cat_gap[static_cast<std::size_t>(c)];
    for (std::size_t s = 0; s < slots.size(); ++s) {
      PosSlot slot;
      slot.query = slots[s].first;
      slot.gap = s < gaps.size();
      slot.item = slot.gap ? gaps[s] : 0;  // normal items assigned below
      pos_slots_per_query[slot.query].push_back(slot);
    }
  }
  // distinct normal items per query for the non-gap slots
  for (std::size_t qidx = 0; qidx < n_queries; ++qidx) {
    const auto c = static_cast<std::size_t>(queries[qidx].category);
    auto pool = cat_normal[c];
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng() % i]);
    std::size_t next = 0;
    for (auto& slot : pos_slots_per_query[qidx]) {
      if (!slot.gap) slot.item = pool[next++];
    }
  }
  // guarantee lexical overlap for every non-gap positive (append one query
  // token when the sampled title misses all of them)
  for (std::size_t qidx = 0; qidx < n_queries; ++qidx) {
    for (const auto& slot : pos_slots_per_query[qidx]) {
      if (slot.gap) continue;
      auto& item = items[slot.item];
      if (!shares_token(queries[qidx].tokens, item.tokens)) {
        item.tokens.push_back(queries[qidx].tokens[pick(rng, queries[qidx].tokens.size())]);
      }
    }
  }

  std::vector<std::string> titles(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) titles[i] = render(items[i].tokens);

  // ---- logs ----
  SynthOutput out;
  auto emit = [&](std::size_t qidx, std::size_t item_idx, std::int64_t clicks,
                  std::int64_t purchases, std::int64_t impressions) {
    graph::LogRecord rec;
    rec.query = queries[qidx].text;
    rec.item_id = items[item_idx].external_id;
    rec.title = titles[item_idx];
    rec.clicks = clicks;
    rec.purchases = purchases;
    rec.impressions = impressions;
    out.log.push_back(std::move(rec));
  };

  for (std::size_t qidx = 0; qidx < n_queries; ++qidx) {
    const auto c = static_cast<std::size_t>(queries[qidx].category);
    std::set<std::size_t> clicked;
    for (const auto& slot : pos_slots_per_query[qidx]) {
      if (!slot.gap) clicked.insert(slot.item);
    }
    // extra same-category clicks, preferring lexically matching items
    int extra = 2 + static_cast<int>(rng() % 3);
    const auto& normals = cat_normal[c];
    for (int e = 0; e < extra && clicked.size() < normals.size(); ++e) {
      std::size_t best = normals[pick(rng, normals.size())];
      for (int tries = 0; tries < 20; ++tries) {
        std::size_t cand = normals[pick(rng, normals.size())];
        if (clicked.count(cand)) continue;
        best = cand;
        if (shares_token(queries[qidx].tokens, items[cand].tokens)) break;
      }
      if (clicked.count(best)) continue;
      clicked.insert(best);
    }

    for (auto item_idx : clicked) {
      std::int64_t clicks = 1 + static_cast<std::int64_t>(rng() % 5);
      std::int64_t purchases =
          bernoulli(rng, cfg.purchase_rate) ? 1 + static_cast<std::int64_t>(rng() % 2) : 0;
      emit(qidx, item_idx, clicks, purchases, 0);

      if (bernoulli(rng, cfg.noise_click_rate)) {
        auto other_cat = (c + 1 + pick(rng, static_cast<std::size_t>(C - 1))) %
                         static_cast<std::size_t>(C);
        const auto& pool = cat_items[other_cat];
        emit(qidx, pool[pick(rng, pool.size())], 1, 0, 0);
      }
      if (bernoulli(rng, cfg.impression_rate)) {
        for (int tries = 0; tries < 20; ++tries) {
          std::size_t cand = normals[pick(rng, normals.size())];
          if (clicked.count(cand)) continue;
          emit(qidx, cand, 0, 0, 1 + static_cast<std::int64_t>(rng() % 3));
          break;
        }
      }
    }
  }

  // gap items stay connected through purchases from other same-category
  // queries, so refinement cannot isolate them
  for (int c = 0; c < C; ++c) {
    for (auto item_idx : cat_gap[static_cast<std::size_t>(c)]) {
      std::size_t paired_query = n_queries;  // the eval query this gap item answers
      for (std::size_t qidx = static_cast<std::size_t>(c) * static_cast<std::size_t>(QPC);
           qidx < (static_cast<std::size_t>(c) + 1) * static_cast<std::size_t>(QPC); ++qidx) {
        for (const auto& slot : pos_slots_per_query[qidx]) {
          if (slot.gap && slot.item == item_idx) paired_query = qidx;
        }
      }
      std::set<std::size_t> connected;
      int want = 2 + static_cast<int>(rng() % 2);
      for (int tries = 0; tries < 200 && static_cast<int>(connected.size()) < want; ++tries) {
        std::size_t qidx = static_cast<std::size_t>(c) * static_cast<std::size_t>(QPC) +
                           pick(rng, static_cast<std::size_t>(QPC));
        if (qidx == paired_query || connected.count(qidx)) continue;
        connected.insert(qidx);
      }
      for (auto qidx : connected) {
        emit(qidx, item_idx, 1 + static_cast<std::int64_t>(rng() % 3),
             1 + static_cast<std::int64_t>(rng() % 2), 0);
      }
    }
  }

  // ---- ground truth pairs ----
  for (std::size_t qidx = 0; qidx < n_queries; ++qidx) {
    const auto c = static_cast<std::size_t>(queries[qidx].category);
    for (const auto& slot : pos_slots_per_query[qidx]) {
      out.truth.push_back({queries[qidx].text, items[slot.item].external_id, 1});
    }
    std::set<std::size_t> negs;
    while (static_cast<int>(negs.size()) < cfg.eval_neg_per_query) {
      auto other_cat = (c + 1 + pick(rng, static_cast<std::size_t>(C - 1))) %
                       static_cast<std::size_t>(C);
      const auto& pool = cat_items[other_cat];
      negs.insert(pool[pick(rng, pool.size())]);
    }
    for (auto item_idx : negs) {
      out.truth.push_back({queries[qidx].text, items[item_idx].external_id, 0});
    }
  }
  return out;
}

void write_truth_tsv(std::span<const TruthPair> truth, std::ostream& out) {
  for (const auto& p : truth) {
    out << detail::escape_field(p.query) << '\t' << detail::escape_field(p.item_id) << '\t'
        << p.label << '\n';
  }
}

std::vector<TruthPair> load_truth_tsv(std::istream& in) {
  std::vector<TruthPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = detail::split_tabs(line);
    if (fields.size() != 3 || (fields[2] != "0" && fields[2] != "1")) {
      throw Error("truth: line " + std::to_string(lineno) + ": expected query, item_id, 0/1");
    }
    out.push_back({detail::unescape_field(fields[0]), detail::unescape_field(fields[1]),
                   fields[2] == "1" ? 1 : 0});
  }
  return out;
}

}  // namespace hg4sm::synth
