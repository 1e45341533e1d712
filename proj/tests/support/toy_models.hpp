// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include "dlens/model.hpp"

namespace dlens::testing {

std::filesystem::path data_dir();       // repository data/
std::filesystem::path test_data_dir();  // tests/data/

/// The bundled GPT-2 vocabulary, loaded once.
std::shared_ptr<const BpeTokenizer> gpt2_tokenizer();

/// tests/data/tiny_gpt2: 2 layers, 2 heads, d_model 8, full GPT-2 vocabulary.
const ModelBundle& tiny_gpt2();

/// f(salt, i, j) = ((13 salt + 7 i + 3 j) mod 17 - 8) / 8, the parameter
/// formula of the hand-built fixture.
double hand_param(int salt, int i, int j);

/// 1 layer, 1 head, d_model 4, vocab 5, n_ctx 4, parameters from hand_param.
ModelBundle hand_model();

/// Two single-head layers over vocab V and n_ctx P with d_model = 2V + P.
/// Layer 0 copies the previous token into a dedicated subspace; layer 1
/// matches the current token against it, so on BOS + s + s (token 0 = BOS,
/// distinct tokens in s) layer 1 attends from t to t - |s| + 1.
ModelBundle induction_toy(int vocab = 20, int n_ctx = 16);

/// Random weights with the given shape; no tokenizer unless given.
ModelBundle random_model(const ModelConfig& config, std::uint64_t seed,
                         std::shared_ptr<const BpeTokenizer> tokenizer = nullptr, float scale = 0.5f);

/// GPT-2 vocabulary, d_model 4: the final layer norm outputs e0 and the
/// unembedding row of `forced` is 10 e0, so the argmax is `forced` for any
/// input.
ModelBundle rigged_model(TokenId forced);

/// GPT-2 vocabulary with zero query/key weights: every attention row is
/// uniform over the visible keys.
ModelBundle uniform_attention_model();

}  // namespace dlens::testing
