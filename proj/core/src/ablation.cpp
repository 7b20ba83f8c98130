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

#include "hg4sm/ablation.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "hg4sm/error.hpp"

namespace hg4sm::eval {

std::vector<model::ComponentSet> ablation_grid() {
  using CS = model::ComponentSet;
  return {
      CS{true, false, false},  // Rep
      CS{false, true, false},  // Int
      CS{false, false, true},  // HIN
      CS{true, true, false},   // Rep+Int
      CS{false, true, true},   // Int+HIN
      CS{true, false, true},   // Rep+HIN
      CS{true, true, true},    // all three
  };
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

AblationTable ablation_run(const graph::BipartiteGraph& g,
                           const std::vector<train::TrainExample>& dataset,
                           const text::Vocab& vocab, const embed::EmbeddingTable& table,
                           const model::ModelConfig& base_model,
                           const train::TrainConfig& base_train,
                           std::span<const model::ComponentSet> subsets,
                           std::span<const std::uint64_t> seeds, double threshold) {
  if (subsets.empty() || seeds.empty()) {
    throw Error("ablation: need at least one subset and one seed");
  }
  AblationTable out;
  for (const auto& subset : subsets) {
    if (!subset.any()) throw Error("ablation: empty component subset");
    std::vector<double> aucs, accs, precs, recalls, f1s, fnrs, fprs;
    for (auto seed : seeds) {
      model::ModelConfig mcfg = base_model;
      mcfg.components = subset;
      train::TrainConfig tcfg = base_train;
      tcfg.seed = seed;
      auto params = model::init_params(mcfg, table, seed);
      auto res = train::train(std::move(params), dataset, g, vocab, mcfg, tcfg);
      EvalReport report = evaluate(res.holdout_scores, threshold);
      aucs.push_back(report.auc);
      accs.push_back(report.acc);
      precs.push_back(report.prec);
      recalls.push_back(report.recall);
      f1s.push_back(report.f1);
      fnrs.push_back(report.fnr);
      fprs.push_back(report.fpr);
      out.runs.push_back({subset, seed, report});
    }
    MetricRow med;
    med.auc = median_of(aucs);
    med.acc = median_of(accs);
    med.prec = median_of(precs);
    med.recall = median_of(recalls);
    med.f1 = median_of(f1s);
    med.fnr = median_of(fnrs);
    med.fpr = median_of(fprs);
    out.medians.emplace_back(subset, med);
  }
  return out;
}

std::string AblationTable::to_tsv() const {
  std::string out = "model\tauc\tacc\tprec\trecall\tf1\tfnr(-)\n";
  char buf[256];
  for (const auto& [subset, m] : medians) {
    std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\n",
                  model::components_name(subset).c_str(), m.auc, m.acc, m.prec, m.recall, m.f1,
                  m.fnr);
    out += buf;
  }
  return out;
}

std::string AblationTable::to_json() const {
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : runs) {
    j["runs"].push_back({{"model", model::components_name(r.subset)},
                         {"seed", r.seed},
                         {"report", nlohmann::json::parse(r.report.to_json())}});
  }
  j["medians"] = nlohmann::json::array();
  for (const auto& [subset, m] : medians) {
    j["medians"].push_back({{"model", model::components_name(subset)},
                            {"auc", m.auc},
                            {"acc", m.acc},
                            {"prec", m.prec},
                            {"recall", m.recall},
                            {"f1", m.f1},
                            {"fnr", m.fnr},
                            {"fpr", m.fpr}});
  }
  return j.dump(2);
}

}  // namespace hg4sm::eval
