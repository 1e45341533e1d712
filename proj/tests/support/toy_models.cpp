// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "toy_models.hpp"

#include <cmath>
#include <mutex>
#include <random>

namespace dlens::testing {
namespace {

LayerWeights zero_layer(int d) {
  LayerWeights l;
  l.ln1_weight = RowVector::Ones(d);
  l.ln1_bias = RowVector::Zero(d);
  l.attn_qkv = Matrix::Zero(d, 3 * d);
  l.attn_qkv_bias = RowVector::Zero(3 * d);
  l.attn_out = Matrix::Zero(d, d);
  l.attn_out_bias = RowVector::Zero(d);
  l.ln2_weight = RowVector::Ones(d);
  l.ln2_bias = RowVector::Zero(d);
  l.mlp_in = Matrix::Zero(d, 4 * d);
  l.mlp_in_bias = RowVector::Zero(4 * d);
  l.mlp_out = Matrix::Zero(4 * d, d);
  l.mlp_out_bias = RowVector::Zero(d);
  return l;
}

ModelWeights zero_weights(const ModelConfig& c) {
  ModelWeights w;
  w.token_embed = Matrix::Zero(c.d_vocab, c.d_model);
  w.pos_embed = Matrix::Zero(c.n_ctx, c.d_model);
  for (int i = 0; i < c.n_layer; ++i) w.layers.push_back(zero_layer(c.d_model));
  w.ln_f_weight = RowVector::Ones(c.d_model);
  w.ln_f_bias = RowVector::Zero(c.d_model);
  return w;
}

Matrix hand_matrix(int salt, int rows, int cols) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = static_cast<float>(hand_param(salt, i, j));
  return m;
}

RowVector hand_bias(int salt, int n) {
  RowVector v(n);
  for (int j = 0; j < n; ++j) v[j] = static_cast<float>(hand_param(salt, 0, j) / 4.0);
  return v;
}

RowVector hand_gain(int salt, int n) { return hand_bias(salt, n).array() + 1.0f; }

/// Layer-norm parameters that make LN the identity on inputs whose entries
/// are `ones` ones and zeros elsewhere.
void identity_norm(RowVector& weight, RowVector& bias, int d, int ones, float eps) {
  const double mean = static_cast<double>(ones) / d;
  const double var = mean - mean * mean;
  const double sd = std::sqrt(var + eps);
  weight = RowVector::Constant(d, static_cast<float>(sd));
  bias = RowVector::Constant(d, static_cast<float>(mean));
}

}  // namespace

std::filesystem::path data_dir() { return DLENS_DATA_DIR; }
std::filesystem::path test_data_dir() { return DLENS_TEST_DATA_DIR; }

std::shared_ptr<const BpeTokenizer> gpt2_tokenizer() {
  static std::once_flag once;
  static std::shared_ptr<const BpeTokenizer> tok;
  std::call_once(once, [] { tok = std::make_shared<const BpeTokenizer>(BpeTokenizer::load(data_dir() / "gpt2")); });
  return tok;
}

const ModelBundle& tiny_gpt2() {
  static const ModelBundle bundle = load_model_dir(test_data_dir() / "tiny_gpt2", data_dir() / "gpt2");
  return bundle;
}

double hand_param(int salt, int i, int j) { return ((13 * salt + 7 * i + 3 * j) % 17 - 8) / 8.0; }

ModelBundle hand_model() {
  ModelConfig c;
  c.n_layer = 1;
  c.n_head = 1;
  c.d_model = 4;
  c.d_vocab = 5;
  c.n_ctx = 4;
  const int d = 4;
  ModelWeights w;
  w.token_embed = hand_matrix(1, 5, d);
  w.pos_embed = hand_matrix(2, 4, d);
  LayerWeights l;
  l.ln1_weight = hand_gain(3, d);
  l.ln1_bias = hand_bias(4, d);
  l.attn_qkv = hand_matrix(5, d, 3 * d);
  l.attn_qkv_bias = hand_bias(6, 3 * d);
  l.attn_out = hand_matrix(7, d, d);
  l.attn_out_bias = hand_bias(8, d);
  l.ln2_weight = hand_gain(9, d);
  l.ln2_bias = hand_bias(10, d);
  l.mlp_in = hand_matrix(11, d, 4 * d);
  l.mlp_in_bias = hand_bias(12, 4 * d);
  l.mlp_out = hand_matrix(13, 4 * d, d);
  l.mlp_out_bias = hand_bias(14, d);
  w.layers.push_back(l);
  w.ln_f_weight = hand_gain(15, d);
  w.ln_f_bias = hand_bias(16, d);
  return ModelBundle(c, std::move(w), nullptr, "hand");
}

ModelBundle induction_toy(int vocab, int n_ctx) {
  ModelConfig c;
  c.n_layer = 2;
  c.n_head = 1;
  c.d_model = 2 * vocab + n_ctx;
  c.d_vocab = vocab;
  c.n_ctx = n_ctx;
  const int d = c.d_model;
  const int tok0 = 0, pos0 = vocab, prev0 = vocab + n_ctx;
  // Score for a match is beta^2 / sqrt(d); 30 makes attention one-hot to
  // well below 1e-6.
  const float beta = static_cast<float>(std::sqrt(30.0 * std::sqrt(static_cast<double>(d))));

  ModelWeights w = zero_weights(c);
  for (int v = 0; v < vocab; ++v) w.token_embed(v, tok0 + v) = 1.0f;
  for (int p = 0; p < n_ctx; ++p) w.pos_embed(p, pos0 + p) = 1.0f;

  // Layer 0: query position t matches key position t - 1, value copies the
  // key's token into the previous-token block.
  auto& l0 = w.layers[0];
  identity_norm(l0.ln1_weight, l0.ln1_bias, d, 2, c.ln_eps);
  for (int p = 0; p < n_ctx; ++p) {
    l0.attn_qkv(pos0 + p, pos0 + p) = beta;                               // q
    if (p + 1 < n_ctx) l0.attn_qkv(pos0 + p, d + pos0 + p + 1) = beta;  // k
  }
  for (int v = 0; v < vocab; ++v) {
    l0.attn_qkv(tok0 + v, 2 * d + prev0 + v) = 1.0f;  // v
    l0.attn_out(prev0 + v, prev0 + v) = 1.0f;
  }

  // Layer 1: the current token matches keys whose previous token is equal.
  auto& l1 = w.layers[1];
  identity_norm(l1.ln1_weight, l1.ln1_bias, d, 3, c.ln_eps);
  for (int v = 0; v < vocab; ++v) {
    l1.attn_qkv(tok0 + v, tok0 + v) = beta;
    l1.attn_qkv(prev0 + v, d + tok0 + v) = beta;
    l1.attn_qkv(tok0 + v, 2 * d + tok0 + v) = 1.0f;
    l1.attn_out(tok0 + v, tok0 + v) = 1.0f;
  }
  return ModelBundle(c, std::move(w), nullptr, "induction-toy");
}

ModelBundle random_model(const ModelConfig& config, std::uint64_t seed, std::shared_ptr<const BpeTokenizer> tokenizer,
                         float scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, scale);
  auto fill = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  };
  ModelWeights w = zero_weights(config);
  fill(w.token_embed);
  fill(w.pos_embed);
  for (auto& l : w.layers) {
    fill(l.attn_qkv);
    fill(l.attn_qkv_bias);
    fill(l.attn_out);
    fill(l.attn_out_bias);
    fill(l.mlp_in);
    fill(l.mlp_in_bias);
    fill(l.mlp_out);
    fill(l.mlp_out_bias);
    fill(l.ln1_bias);
    fill(l.ln2_bias);
    l.ln1_weight.array() += 0.1f * l.ln1_bias.array();
    l.ln2_weight.array() -= 0.1f * l.ln2_bias.array();
  }
  return ModelBundle(config, std::move(w), std::move(tokenizer), "random");
}

ModelBundle rigged_model(TokenId forced) {
  ModelConfig c;
  c.n_layer = 1;
  c.n_head = 1;
  c.d_model = 4;
  c.d_vocab = 50257;
  c.n_ctx = 256;
  ModelWeights w = zero_weights(c);
  w.ln_f_weight = RowVector::Zero(4);
  w.ln_f_bias = RowVector::Zero(4);
  w.ln_f_bias[0] = 1.0f;
  w.token_embed(forced, 0) = 10.0f;
  return ModelBundle(c, std::move(w), gpt2_tokenizer(), "rigged");
}

ModelBundle uniform_attention_model() {
  ModelConfig c;
  c.n_layer = 2;
  c.n_head = 2;
  c.d_model = 8;
  c.d_vocab = 50257;
  c.n_ctx = 256;
  ModelBundle random = random_model(c, 99, gpt2_tokenizer(), 0.5f);
  ModelWeights w = random.weights();
  for (auto& l : w.layers) {
    l.attn_qkv.leftCols(2 * c.d_model).setZero();
    l.attn_qkv_bias.head(2 * c.d_model).setZero();
  }
  return ModelBundle(c, std::move(w), gpt2_tokenizer(), "uniform-attention");
}

}  // namespace dlens::testing
