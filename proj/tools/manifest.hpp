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

// Per-run reproducibility manifest: input content hashes plus the resolved
// configuration, written next to each produced artifact. No timestamps, so
// identical runs produce identical manifests.

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hg4sm/error.hpp"

namespace hg4sm::cli {

inline std::string fnv1a64_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("manifest: cannot hash missing input: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 14];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
    for (std::streamsize k = 0; k < f.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 1099511628211ULL;
    }
    if (!f) break;
  }
  char hex[32];
  std::snprintf(hex, sizeof(hex), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return hex;
}

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}

  void add_input(const std::string& path) { inputs_[path] = fnv1a64_file(path); }
  void add_output(const std::string& path) { outputs_.push_back(path); }
  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = static_cast<std::int64_t>(seed); }

  // Written as <primary_output>.manifest.json
  void write(const std::string& primary_output) const {
    nlohmann::json j;
    j["command"] = command_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["config"] = config_;
    if (seed_ >= 0) j["seed"] = seed_;
    std::ofstream f(primary_output + ".manifest.json", std::ios::binary);
    if (!f) throw Error("manifest: cannot write " + primary_output + ".manifest.json");
    f << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  nlohmann::json inputs_ = nlohmann::json::object();
  std::vector<std::string> outputs_;
  nlohmann::json config_ = nlohmann::json::object();
  std::int64_t seed_ = -1;
};

}  // namespace hg4sm::cli
