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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hg4sm::text {

using WordId = std::int32_t;

inline constexpr WordId kPadId = 0;
inline constexpr WordId kUnkId = 1;
inline constexpr std::size_t kReservedIds = 2;

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

struct CodepointRange {
  char32_t lo;
  char32_t hi;
  bool operator==(const CodepointRange&) const = default;
};

// Codepoint ranges tokenized one-character-per-token. Defaults to the CJK
// Unified Ideographs blocks; other scripts fall through to the separator rule.
std::vector<CodepointRange> default_cjk_ranges();

// "4E00-9FFF,3400-4DBF" (hex, inclusive); empty spec -> the default ranges.
std::vector<CodepointRange> parse_codepoint_ranges(std::string_view spec);

struct TokenizerConfig {
  std::vector<CodepointRange> cjk_ranges = default_cjk_ranges();
};

// E-commerce vocabulary rule: each CJK character is its own token; each
// maximal run of ASCII letters/digits is one token, lowercased ("iphone11"
// and "256gb" stay whole). Everything else separates. Full-width ASCII forms
// are folded to half-width before classification.
std::vector<std::string> tokenize(std::string_view text);
std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg);

struct Encoded {
  std::vector<WordId> ids;  // length == max_len, right-padded with kPadId
  int true_len = 0;
};

class Vocab {
 public:
  // PAD/UNK only.
  Vocab() = default;

  WordId id_of(std::string_view token) const;  // kUnkId when absent
  const std::string& token(WordId id) const;   // throws Error on bad id
  std::int64_t count(WordId id) const;
  std::size_t size() const { return id_to_token_.size(); }  // reserved included

  int min_count() const { return min_count_; }
  int max_size() const { return max_size_; }
  const TokenizerConfig& tokenizer_config() const { return tok_cfg_; }
  // The vocab file does not carry the tokenizer config; callers that loaded
  // a vocab built with custom ranges re-attach them here.
  void set_tokenizer_config(TokenizerConfig cfg) { tok_cfg_ = std::move(cfg); }

  // tokenize + map (UNK for out-of-vocabulary) + truncate/pad to max_len.
  Encoded encode(std::string_view text, int max_len) const;

  // Unpadded, untruncated id sequence; used to build embedding corpora.
  std::vector<WordId> encode_ids(std::string_view text) const;

  // UTF-8 text, header "#hg4sm-vocab v1", one token<TAB>id<TAB>count line per
  // stored (non-reserved) entry, ids ascending.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  bool operator==(const Vocab& other) const;

 private:
  friend class VocabBuilder;

  std::unordered_map<std::string, WordId> token_to_id_;
  std::vector<std::string> id_to_token_ = {kPadToken, kUnkToken};
  std::vector<std::int64_t> counts_ = {0, 0};
  int min_count_ = 1;
  int max_size_ = 0;
  TokenizerConfig tok_cfg_;
};

// Streaming corpus counter. add() may be called any number of times; finish()
// applies the min_count filter and the frequency cap (ties at the cap break
// lexicographically) and assigns dense ids by (count desc, token asc), which
// makes the result independent of corpus order.
class VocabBuilder {
 public:
  explicit VocabBuilder(TokenizerConfig cfg = {});

  void add(std::string_view sentence);

  Vocab finish(int min_count, int max_size) const;

 private:
  TokenizerConfig cfg_;
  std::unordered_map<std::string, std::int64_t> counts_;
};

Vocab build_vocab(std::span<const std::string> corpus, int min_count, int max_size,
                  TokenizerConfig cfg = {});

}  // namespace hg4sm::text
