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

// Flat key=value run configuration. One file can hold keys for every
// subcommand; each command applies only the keys it knows, and a flag given
// on the command line always wins over the file.

#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hg4sm/error.hpp"

namespace hg4sm::cli {

class FileConfig {
 public:
  FileConfig() = default;

  static FileConfig load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open config file: " + path);
    FileConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      std::size_t start = line.find_first_not_of(" \t");
      if (start == std::string::npos || line[start] == '#') continue;
      std::size_t eq = line.find('=', start);
      if (eq == std::string::npos) {
        throw Error("config: line " + std::to_string(lineno) + ": expected key=value");
      }
      auto trim = [](std::string s) {
        std::size_t a = s.find_first_not_of(" \t");
        std::size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      std::string key = trim(line.substr(start, eq - start));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) {
        throw Error("config: line " + std::to_string(lineno) + ": empty key");
      }
      cfg.values_[key] = value;
    }
    return cfg;
  }

  // "--emb-dim" -> "emb_dim"
  static std::string key_of(const std::string& flag) {
    std::string key = flag.substr(flag.find_first_not_of('-'));
    for (auto& c : key) {
      if (c == '-') c = '_';
    }
    return key;
  }

  // File value applies only when the flag was not given on the command line.
  template <typename T>
  void apply(const CLI::App* sub, const std::string& flag, T& var) const {
    if (sub->count(flag) > 0) return;
    auto it = values_.find(key_of(flag));
    if (it == values_.end()) return;
    parse_into(it->second, var, flag);
  }

 private:
  static void parse_into(const std::string& s, std::string& var, const std::string&) {
    var = s;
  }
  static void parse_into(const std::string& s, bool& var, const std::string& flag) {
    if (s == "1" || s == "true" || s == "yes") {
      var = true;
    } else if (s == "0" || s == "false" || s == "no") {
      var = false;
    } else {
      throw Error("config: bad boolean for " + flag + ": '" + s + "'");
    }
  }
  template <typename T>
  static void parse_into(const std::string& s, T& var, const std::string& flag) {
    std::istringstream ss(s);
    T value{};
    if (!(ss >> value) || !ss.eof()) {
      throw Error("config: bad value for " + flag + ": '" + s + "'");
    }
    var = value;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace hg4sm::cli
