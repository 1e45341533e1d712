// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dlens/tensor_archive.hpp"
#include "dlens/tokenizer.hpp"

namespace dlens {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXf;

enum class Architecture { kGpt2 };

struct ModelConfig {
  int n_layer = 0;
  int n_head = 0;
  int d_model = 0;
  int d_vocab = 0;
  int n_ctx = 0;
  float ln_eps = 1e-5f;
  Architecture architecture = Architecture::kGpt2;
  bool tied_unembedding = true;

  int d_head() const { return d_model / n_head; }
  int d_mlp() const { return 4 * d_model; }

  /// Throws InvalidArgument when counts are non-positive or d_model is not
  /// divisible by n_head.
  void validate() const;

  /// Accepts both {n_layer, n_head, d_model, d_vocab, n_ctx, ln_eps} and the
  /// Hugging Face GPT-2 spelling {n_embd, vocab_size, n_positions,
  /// layer_norm_epsilon}.
  static ModelConfig from_json_file(const std::filesystem::path& path);
};

struct LayerWeights {
  RowVector ln1_weight, ln1_bias;
  Matrix attn_qkv;  // [d_model, 3*d_model], columns ordered q | k | v
  RowVector attn_qkv_bias;
  Matrix attn_out;  // [d_model, d_model]
  RowVector attn_out_bias;
  RowVector ln2_weight, ln2_bias;
  Matrix mlp_in;  // [d_model, d_mlp]
  RowVector mlp_in_bias;
  Matrix mlp_out;  // [d_mlp, d_model]
  RowVector mlp_out_bias;
};

/// Weights in matmul orientation: activations are row vectors and every
/// projection is `x * W`. GPT-2 checkpoints store their Conv1D projections as
/// [in, out], which is this orientation already; `lm_head.weight` is [vocab,
/// d_model] like the token embedding.
struct ModelWeights {
  Matrix token_embed;  // [d_vocab, d_model]
  Matrix pos_embed;    // [n_ctx, d_model]
  std::vector<LayerWeights> layers;
  RowVector ln_f_weight, ln_f_bias;
  Matrix unembed;  // [d_vocab, d_model]; empty when tied to token_embed
};

/// Builds ModelWeights from tensors named like the released GPT-2 checkpoint
/// ("wte.weight", "h.{i}.attn.c_attn.weight", ...). A leading "transformer."
/// is stripped. Missing tensors and shape mismatches throw LoadError naming
/// the tensor; unknown tensors are appended to `unused` when provided.
ModelWeights weights_from_tensors(const ModelConfig& config, const NamedTensors& tensors,
                                  std::vector<std::string>* unused = nullptr);
ModelWeights weights_from_archive(const ModelConfig& config, const TensorArchive& archive,
                                  std::vector<std::string>* unused = nullptr);

/// Configuration, weights and tokenizer of one model. Immutable after
/// construction and safe to share across threads.
class ModelBundle {
 public:
  ModelBundle(ModelConfig config, ModelWeights weights, std::shared_ptr<const BpeTokenizer> tokenizer,
              std::string id = "model");

  const ModelConfig& config() const { return config_; }
  const ModelWeights& weights() const { return weights_; }
  const Matrix& unembedding() const;

  bool has_tokenizer() const { return tokenizer_ != nullptr; }
  const BpeTokenizer& tokenizer() const;
  std::shared_ptr<const BpeTokenizer> tokenizer_ptr() const { return tokenizer_; }

  const std::string& id() const { return id_; }
  /// Names of archive tensors that were present but not used.
  const std::vector<std::string>& unused_tensors() const { return unused_; }
  void set_unused_tensors(std::vector<std::string> names) { unused_ = std::move(names); }

 private:
  ModelConfig config_;
  ModelWeights weights_;
  std::shared_ptr<const BpeTokenizer> tokenizer_;
  std::string id_;
  std::vector<std::string> unused_;
};

/// Loads archive + config + tokenizer. The bundle id is the archive's parent
/// directory name.
ModelBundle load_model(const std::filesystem::path& weights_path, const std::filesystem::path& config_path,
                       const std::filesystem::path& tokenizer_dir);

/// Resolves `<dir>/model.safetensors`, `<dir>/config.json` and a tokenizer
/// directory (`dir` itself when it holds vocab.json, else `fallback_tokenizer_dir`).
ModelBundle load_model_dir(const std::filesystem::path& dir, const std::filesystem::path& fallback_tokenizer_dir);

}  // namespace dlens
