// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/tokenizer.hpp"

#include <unicode/uchar.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "dlens/error.hpp"

namespace dlens {
namespace {

constexpr std::string_view kEndOfText = "<|endoftext|>";

std::array<char32_t, 256> make_byte_table() {
  std::array<char32_t, 256> table{};
  std::array<bool, 256> printable{};
  for (int b = '!'; b <= '~'; ++b) printable[b] = true;
  for (int b = 0xA1; b <= 0xAC; ++b) printable[b] = true;
  for (int b = 0xAE; b <= 0xFF; ++b) printable[b] = true;
  char32_t next = 256;
  for (int b = 0; b < 256; ++b) table[b] = printable[b] ? static_cast<char32_t>(b) : next++;
  return table;
}

const std::array<char32_t, 256>& byte_table() {
  static const auto table = make_byte_table();
  return table;
}

// Inverse of the byte alias table, indexed by codepoint (all aliases < 324).
const std::vector<int>& codepoint_table() {
  static const std::vector<int> inverse = [] {
    std::vector<int> inv(512, -1);
    const auto& fwd = byte_table();
    for (int b = 0; b < 256; ++b) inv[fwd[b]] = b;
    return inv;
  }();
  return inverse;
}

struct CodePoint {
  char32_t value;
  std::size_t offset;
  std::size_t length;
};

// Decodes UTF-8; each byte of an invalid sequence becomes its own
// pseudo-codepoint in the private 0x110000+ range so it classifies as "other".
std::vector<CodePoint> decode_utf8(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      len = 1;
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    }
    bool valid = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; valid && k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) valid = false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!valid) {
      out.push_back({static_cast<char32_t>(0x110000 + c), i, 1});
      ++i;
      continue;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

enum class CharClass { kLetter, kNumber, kSpace, kOther };

CharClass classify(char32_t cp) {
  if (cp >= 0x110000) return CharClass::kOther;
  const auto c = static_cast<UChar32>(cp);
  if (u_isUWhiteSpace(c)) return CharClass::kSpace;
  switch (u_charType(c)) {
    case U_UPPERCASE_LETTER:
    case U_LOWERCASE_LETTER:
    case U_TITLECASE_LETTER:
    case U_MODIFIER_LETTER:
    case U_OTHER_LETTER:
      return CharClass::kLetter;
    case U_DECIMAL_DIGIT_NUMBER:
    case U_LETTER_NUMBER:
    case U_OTHER_NUMBER:
      return CharClass::kNumber;
    default:
      return CharClass::kOther;
  }
}

// Length in codepoints of a contraction suffix ('s 't 're 've 'm 'll 'd) at i.
std::size_t contraction_at(const std::vector<CodePoint>& cps, std::size_t i) {
  if (cps[i].value != U'\'' || i + 1 >= cps.size()) return 0;
  const char32_t a = cps[i + 1].value;
  if (a == U's' || a == U't' || a == U'm' || a == U'd') return 2;
  if (i + 2 < cps.size()) {
    const char32_t b = cps[i + 2].value;
    if ((a == U'r' && b == U'e') || (a == U'v' && b == U'e') || (a == U'l' && b == U'l')) return 3;
  }
  return 0;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Maps a vocabulary-file string (printable aliases) back to raw bytes.
std::string unalias(std::string_view alias, const std::filesystem::path& source) {
  std::string raw;
  raw.reserve(alias.size());
  const auto& inverse = codepoint_table();
  for (const auto& cp : decode_utf8(alias)) {
    if (cp.value >= inverse.size() || inverse[cp.value] < 0) {
      throw LoadError("unmapped codepoint in " + source.string() + " entry '" + std::string(alias) + "'");
    }
    raw.push_back(static_cast<char>(inverse[cp.value]));
  }
  return raw;
}

std::uint64_t pair_key(TokenId a, TokenId b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

char32_t BpeTokenizer::byte_to_codepoint(std::uint8_t byte) { return byte_table()[byte]; }

BpeTokenizer BpeTokenizer::load(const std::filesystem::path& dir) {
  return from_files(dir / "vocab.json", dir / "merges.txt");
}

BpeTokenizer BpeTokenizer::from_files(const std::filesystem::path& vocab_json,
                                      const std::filesystem::path& merges_txt) {
  BpeTokenizer tok;
  nlohmann::json vocab;
  try {
    vocab = nlohmann::json::parse(read_file(vocab_json));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(vocab_json.string() + ": " + e.what());
  }
  if (!vocab.is_object()) throw LoadError(vocab_json.string() + ": expected a JSON object");

  tok.id_to_bytes_.resize(vocab.size());
  std::vector<bool> seen(vocab.size(), false);
  for (const auto& [alias, value] : vocab.items()) {
    if (!value.is_number_integer()) throw LoadError("non-integer id for token '" + alias + "'");
    const auto id = value.get<std::int64_t>();
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size() || seen[id]) {
      throw LoadError("vocabulary ids are not a bijection onto [0, size): token '" + alias + "'");
    }
    seen[id] = true;
    std::string raw = alias == kEndOfText ? std::string(kEndOfText) : unalias(alias, vocab_json);
    if (raw.empty()) throw LoadError("empty token '" + alias + "'");
    if (alias == kEndOfText) tok.end_of_text_ = static_cast<TokenId>(id);
    if (!tok.bytes_to_id_.emplace(raw, static_cast<TokenId>(id)).second) {
      throw LoadError("duplicate token bytes for '" + alias + "'");
    }
    tok.id_to_bytes_[id] = std::move(raw);
  }
  for (int b = 0; b < 256; ++b) {
    auto it = tok.bytes_to_id_.find(std::string(1, static_cast<char>(b)));
    if (it == tok.bytes_to_id_.end()) throw LoadError("vocabulary lacks single-byte token " + std::to_string(b));
    tok.byte_token_[b] = it->second;
  }

  std::ifstream merges(merges_txt);
  if (!merges) throw LoadError("cannot open " + merges_txt.string());
  std::string line;
  std::int32_t rank = 0;
  std::size_t line_no = 0;
  while (std::getline(merges, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.rfind("#version", 0) == 0)) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos || line.find(' ', space + 1) != std::string::npos) {
      throw LoadError(merges_txt.string() + ":" + std::to_string(line_no) + ": expected 'tokA tokB'");
    }
    const std::string left = unalias(std::string_view(line).substr(0, space), merges_txt);
    const std::string right = unalias(std::string_view(line).substr(space + 1), merges_txt);
    const auto l = tok.bytes_to_id_.find(left);
    const auto r = tok.bytes_to_id_.find(right);
    const auto m = tok.bytes_to_id_.find(left + right);
    if (l == tok.bytes_to_id_.end() || r == tok.bytes_to_id_.end() || m == tok.bytes_to_id_.end()) {
      throw LoadError(merges_txt.string() + ":" + std::to_string(line_no) + ": merge '" + line +
                      "' references tokens absent from the vocabulary");
    }
    tok.merges_.try_emplace(pair_key(l->second, r->second), Merge{rank, m->second});
    ++rank;
  }
  tok.merge_count_ = static_cast<std::size_t>(rank);
  return tok;
}

std::vector<std::string_view> BpeTokenizer::pre_split(std::string_view text) {
  // 's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
  const auto cps = decode_utf8(text);
  std::vector<CharClass> cls(cps.size());
  for (std::size_t k = 0; k < cps.size(); ++k) cls[k] = classify(cps[k].value);

  std::vector<std::string_view> pieces;
  std::size_t i = 0;
  const std::size_t n = cps.size();
  auto emit = [&](std::size_t from, std::size_t to) {
    const std::size_t begin = cps[from].offset;
    const std::size_t end = to < n ? cps[to].offset : text.size();
    pieces.push_back(text.substr(begin, end - begin));
  };

  while (i < n) {
    if (const auto c = contraction_at(cps, i); c > 0) {
      emit(i, i + c);
      i += c;
      continue;
    }
    std::size_t j = i;
    if (cps[j].value == U' ' && j + 1 < n) ++j;
    const CharClass head = cls[j];
    if (head != CharClass::kSpace) {
      std::size_t k = j;
      while (k < n && cls[k] == head) ++k;
      emit(i, k);
      i = k;
      continue;
    }
    // Whitespace run; leave the last whitespace char for the next word if
    // one follows.
    std::size_t k = i;
    while (k < n && cls[k] == CharClass::kSpace) ++k;
    if (k < n && k - i > 1) --k;
    emit(i, k);
    i = k;
  }
  return pieces;
}

void BpeTokenizer::bpe(std::string_view piece, std::vector<TokenId>& out) const {
  std::vector<TokenId> word;
  word.reserve(piece.size());
  for (char ch : piece) word.push_back(byte_token_[static_cast<std::uint8_t>(ch)]);

  while (word.size() > 1) {
    std::int32_t best_rank = std::numeric_limits<std::int32_t>::max();
    const Merge* best = nullptr;
    TokenId best_left = 0, best_right = 0;
    for (std::size_t k = 0; k + 1 < word.size(); ++k) {
      auto it = merges_.find(pair_key(word[k], word[k + 1]));
      if (it != merges_.end() && it->second.rank < best_rank) {
        best_rank = it->second.rank;
        best = &it->second;
        best_left = word[k];
        best_right = word[k + 1];
      }
    }
    if (best == nullptr) break;
    std::vector<TokenId> next;
    next.reserve(word.size());
    for (std::size_t k = 0; k < word.size();) {
      if (k + 1 < word.size() && word[k] == best_left && word[k + 1] == best_right) {
        next.push_back(best->merged);
        k += 2;
      } else {
        next.push_back(word[k]);
        ++k;
      }
    }
    word.swap(next);
  }
  out.insert(out.end(), word.begin(), word.end());
}

std::vector<TokenId> BpeTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  ids.reserve(text.size() / 3 + 1);
  for (auto piece : pre_split(text)) bpe(piece, ids);
  return ids;
}

std::string BpeTokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) out += token_bytes(id);
  return out;
}

const std::string& BpeTokenizer::token_bytes(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_bytes_.size()) {
    throw InvalidArgument("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(id_to_bytes_.size()));
  }
  return id_to_bytes_[id];
}

bool BpeTokenizer::is_single_token(std::string_view word) const { return encode(word).size() == 1; }

std::optional<TokenId> BpeTokenizer::lookup(std::string_view bytes) const {
  auto it = bytes_to_id_.find(std::string(bytes));
  if (it == bytes_to_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> locate_occurrences(std::span<const TokenId> ids, TokenId target) {
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == target) positions.push_back(i);
  }
  return positions;
}

}  // namespace dlens
