// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dlens {

using TokenId = std::int32_t;

/// Byte-level BPE tokenizer compatible with the GPT-2 vocabulary format.
///
/// Vocabulary entries are stored as raw byte strings; the printable
/// byte-to-codepoint alias used by `vocab.json` and `merges.txt` is undone at
/// load time. Immutable after construction, so `encode`/`decode` may be called
/// concurrently.
class BpeTokenizer {
 public:
  /// Loads `vocab.json` and `merges.txt` from `dir`.
  static BpeTokenizer load(const std::filesystem::path& dir);
  static BpeTokenizer from_files(const std::filesystem::path& vocab_json,
                                 const std::filesystem::path& merges_txt);

  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

  /// Raw bytes of a single token.
  const std::string& token_bytes(TokenId id) const;

  /// True iff `encode(word)` yields exactly one token.
  bool is_single_token(std::string_view word) const;

  /// Id of the token whose raw bytes are exactly `bytes`, if any.
  std::optional<TokenId> lookup(std::string_view bytes) const;

  std::size_t vocab_size() const { return id_to_bytes_.size(); }
  std::size_t merge_count() const { return merge_count_; }
  std::optional<TokenId> end_of_text() const { return end_of_text_; }

  /// GPT-2 regex pre-tokenization. Returned views alias `text`.
  static std::vector<std::string_view> pre_split(std::string_view text);

  /// Printable alias of a byte used in vocabulary files (e.g. 0x20 -> U+0120).
  static char32_t byte_to_codepoint(std::uint8_t byte);

 private:
  BpeTokenizer() = default;
  void bpe(std::string_view piece, std::vector<TokenId>& out) const;

  struct Merge {
    std::int32_t rank;
    TokenId merged;
  };

  std::unordered_map<std::string, TokenId> bytes_to_id_;
  std::vector<std::string> id_to_bytes_;
  std::unordered_map<std::uint64_t, Merge> merges_;
  std::size_t merge_count_ = 0;
  TokenId byte_token_[256] = {};
  std::optional<TokenId> end_of_text_;
};

/// Ascending positions `i` with `ids[i] == target`.
std::vector<std::size_t> locate_occurrences(std::span<const TokenId> ids, TokenId target);

}  // namespace dlens
