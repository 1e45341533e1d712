// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dlens/tokenizer.hpp"

namespace dlens::testing {

/// Seeded random strings: ASCII words and punctuation, whitespace runs,
/// contractions, multi-byte UTF-8 (2, 3 and 4 byte) and a share of raw
/// invalid bytes.
std::vector<std::string> fuzz_corpus(std::uint64_t seed, std::size_t n);

struct GoldenLine {
  std::string text;
  std::vector<TokenId> ids;
};

std::vector<GoldenLine> read_tokenizer_golden(const std::filesystem::path& path);

}  // namespace dlens::testing
