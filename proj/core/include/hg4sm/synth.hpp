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
#include <iosfwd>
#include <string>
#include <vector>

#include "hg4sm/graph.hpp"

namespace hg4sm::synth {

// Category-structured search-log generator with known ground truth. Queries
// and titles draw from per-category token pools (disjoint across categories,
// mixing ASCII runs and CJK characters). A configurable fraction of positive
// eval pairs use synonym-pool titles that share no token with their query, so
// they are decidable only through graph neighborhoods.
struct SynthConfig {
  int n_categories = 20;
  int queries_per_category = 50;
  int items_per_category = 50;
  int vocab_per_category = 24;          // main token pool per category
  int synonym_vocab_per_category = 12;  // synonym pool (lexical-gap titles)
  double noise_click_rate = 0.0;        // chance of a cross-category click per true click
  double purchase_rate = 0.3;           // chance a clicked relevant pair is also purchased
  double impression_rate = 0.5;         // chance of an impression-only record per true click
  double gap_fraction = 0.0;            // fraction of positive eval pairs that are lexical-gap
  int eval_pos_per_query = 2;
  int eval_neg_per_query = 2;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TruthPair {
  std::string query;
  std::string item_id;
  int label;  // 1 iff same category
};

struct SynthOutput {
  std::vector<graph::LogRecord> log;
  std::vector<TruthPair> truth;
};

SynthOutput generate(const SynthConfig& cfg);

// TSV query<TAB>item_id<TAB>label
void write_truth_tsv(std::span<const TruthPair> truth, std::ostream& out);
std::vector<TruthPair> load_truth_tsv(std::istream& in);

}  // namespace hg4sm::synth
