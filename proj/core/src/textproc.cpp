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

#include "hg4sm/textproc.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hg4sm/error.hpp"

namespace hg4sm::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes one codepoint starting at s[i]; advances i past it. Invalid bytes
// decode to U+FFFD one byte at a time so malformed input degrades to
// separators instead of failing.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kReplacement;
  }
  if (i + len > s.size()) {
    ++i;
    return kReplacement;
  }
  for (int k = 1; k < len; ++k) {
    unsigned char bk = byte(i + k);
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return kReplacement;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  // Reject overlong encodings and surrogates.
  if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
      (len == 4 && cp < 0x10000) || (cp >= 0xD800 && cp <= 0xDFFF) ||
      cp > 0x10FFFF) {
    ++i;
    return kReplacement;
  }
  i += len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Full-width ASCII forms fold to their half-width counterparts before
// classification; the ideographic space folds to a plain space.
char32_t normalize(char32_t cp) {
  if (cp >= 0xFF01 && cp <= 0xFF5E) return cp - 0xFEE0;
  if (cp == 0x3000) return 0x20;
  return cp;
}

bool is_ascii_alnum(char32_t cp) {
  return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
         (cp >= 'A' && cp <= 'Z');
}

bool in_ranges(char32_t cp, const std::vector<CodepointRange>& ranges) {
  for (const auto& r : ranges) {
    if (cp >= r.lo && cp <= r.hi) return true;
  }
  return false;
}

}  // namespace

std::vector<CodepointRange> default_cjk_ranges() {
  return {
      {0x4E00, 0x9FFF},    // CJK Unified Ideographs
      {0x3400, 0x4DBF},    // Extension A
      {0xF900, 0xFAFF},    // Compatibility Ideographs
      {0x20000, 0x2A6DF},  // Extension B
      {0x2A700, 0x2EBEF},  // Extensions C-F
      {0x30000, 0x3134F},  // Extension G
  };
}

std::vector<CodepointRange> parse_codepoint_ranges(std::string_view spec) {
  if (spec.empty()) return default_cjk_ranges();
  std::vector<CodepointRange> ranges;
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t comma = spec.find(',', start);
    std::string_view part =
        spec.substr(start, comma == std::string_view::npos ? spec.size() - start : comma - start);
    std::size_t dash = part.find('-');
    if (dash == std::string_view::npos) {
      throw Error("tokenizer: range '" + std::string(part) + "' must be LO-HI (hex)");
    }
    auto parse_hex = [&](std::string_view s) -> char32_t {
      unsigned long v = 0;
      try {
        std::size_t used = 0;
        v = std::stoul(std::string(s), &used, 16);
        if (used != s.size() || s.empty()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error("tokenizer: bad hex codepoint '" + std::string(s) + "'");
      }
      if (v > 0x10FFFF) throw Error("tokenizer: codepoint out of range '" + std::string(s) + "'");
      return static_cast<char32_t>(v);
    };
    CodepointRange r{parse_hex(part.substr(0, dash)), parse_hex(part.substr(dash + 1))};
    if (r.lo > r.hi) {
      throw Error("tokenizer: empty range '" + std::string(part) + "'");
    }
    ranges.push_back(r);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (ranges.empty()) return default_cjk_ranges();
  return ranges;
}

std::vector<std::string> tokenize(std::string_view text) {
  static const TokenizerConfig default_cfg;
  return tokenize(text, default_cfg);
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& cfg) {
  std::vector<std::string> out;
  std::string run;
  auto flush = [&] {
    if (!run.empty()) {
      out.push_back(run);
      run.clear();
    }
  };
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = normalize(decode_utf8(text, i));
    if (is_ascii_alnum(cp)) {
      if (cp >= 'A' && cp <= 'Z') cp += 'a' - 'A';
      run.push_back(static_cast<char>(cp));
    } else if (in_ranges(cp, cfg.cjk_ranges)) {
      flush();
      std::string tok;
      append_utf8(tok, cp);
      out.push_back(std::move(tok));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

WordId Vocab::id_of(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(WordId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw Error("vocab: id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::int64_t Vocab::count(WordId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= counts_.size()) {
    throw Error("vocab: id " + std::to_string(id) + " out of range");
  }
  return counts_[static_cast<std::size_t>(id)];
}

Encoded Vocab::encode(std::string_view text, int max_len) const {
  if (max_len < 1) throw Error("encode: max_len must be >= 1");
  Encoded enc;
  enc.ids.assign(static_cast<std::size_t>(max_len), kPadId);
  auto tokens = tokenize(text, tok_cfg_);
  enc.true_len = static_cast<int>(std::min<std::size_t>(tokens.size(),
                                                        static_cast<std::size_t>(max_len)));
  for (int k = 0; k < enc.true_len; ++k) {
    enc.ids[static_cast<std::size_t>(k)] = id_of(tokens[static_cast<std::size_t>(k)]);
  }
  return enc;
}

std::vector<WordId> Vocab::encode_ids(std::string_view text) const {
  std::vector<WordId> ids;
  for (const auto& tok : tokenize(text, tok_cfg_)) ids.push_back(id_of(tok));
  return ids;
}

void Vocab::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("vocab: cannot open for write: " + path);
  f << "#hg4sm-vocab v1\n";
  for (std::size_t id = kReservedIds; id < id_to_token_.size(); ++id) {
    f << id_to_token_[id] << '\t' << id << '\t' << counts_[id] << '\n';
  }
  if (!f) throw Error("vocab: write failed: " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("vocab: cannot open: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "#hg4sm-vocab v1") {
    throw Error("vocab: missing or bad header in " + path);
  }
  Vocab v;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw Error("vocab: malformed line " + std::to_string(lineno) + " in " + path);
    }
    std::string tok = line.substr(0, t1);
    long long id = 0, cnt = 0;
    try {
      id = std::stoll(line.substr(t1 + 1, t2 - t1 - 1));
      cnt = std::stoll(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw Error("vocab: malformed line " + std::to_string(lineno) + " in " + path);
    }
    if (tok.empty() || id != static_cast<long long>(v.id_to_token_.size())) {
      throw Error("vocab: non-dense id at line " + std::to_string(lineno) + " in " + path);
    }
    v.token_to_id_.emplace(tok, static_cast<WordId>(id));
    v.id_to_token_.push_back(std::move(tok));
    v.counts_.push_back(cnt);
  }
  v.max_size_ = static_cast<int>(v.id_to_token_.size() - kReservedIds);
  return v;
}

bool Vocab::operator==(const Vocab& other) const {
  return id_to_token_ == other.id_to_token_ && counts_ == other.counts_;
}

VocabBuilder::VocabBuilder(TokenizerConfig cfg) : cfg_(std::move(cfg)) {}

void VocabBuilder::add(std::string_view sentence) {
  for (auto& tok : tokenize(sentence, cfg_)) ++counts_[std::move(tok)];
}

Vocab VocabBuilder::finish(int min_count, int max_size) const {
  if (min_count < 1) throw Error("build_vocab: min_count must be >= 1");
  if (max_size < 1) throw Error("build_vocab: max_size must be >= 1");

  std::vector<std::pair<std::string, std::int64_t>> kept;
  kept.reserve(counts_.size());
  for (const auto& [tok, cnt] : counts_) {
    if (cnt >= min_count) kept.emplace_back(tok, cnt);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (kept.size() > static_cast<std::size_t>(max_size)) {
    kept.resize(static_cast<std::size_t>(max_size));
  }

  Vocab v;
  v.min_count_ = min_count;
  v.max_size_ = max_size;
  v.tok_cfg_ = cfg_;
  for (auto& [tok, cnt] : kept) {
    WordId id = static_cast<WordId>(v.id_to_token_.size());
    v.token_to_id_.emplace(tok, id);
    v.id_to_token_.push_back(tok);
    v.counts_.push_back(cnt);
  }
  return v;
}

Vocab build_vocab(std::span<const std::string> corpus, int min_count, int max_size,
                  TokenizerConfig cfg) {
  VocabBuilder b(std::move(cfg));
  for (const auto& s : corpus) b.add(s);
  return b.finish(min_count, max_size);
}

}  // namespace hg4sm::text
