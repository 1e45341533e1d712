// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/model.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dlens/error.hpp"

namespace dlens {
namespace {

std::string shape_str(const std::vector<std::int64_t>& shape) {
  std::ostringstream ss;
  ss << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) ss << (i ? ", " : "") << shape[i];
  ss << ']';
  return ss.str();
}

// Hands out tensors by checkpoint name, validating shapes and reading lazily
// so that at most one widened tensor is alive besides the destination.
class TensorTaker {
 public:
  using Reader = std::function<Tensor(const std::string& original_name)>;

  TensorTaker(std::map<std::string, std::vector<std::int64_t>> shapes, Reader reader) : reader_(std::move(reader)) {
    for (auto& [name, shape] : shapes) {
      std::string key = name.rfind("transformer.", 0) == 0 ? name.substr(12) : name;
      entries_.emplace(std::move(key), Entry{name, std::move(shape)});
    }
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  Tensor get(const std::string& name, const std::vector<std::int64_t>& shape) {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      throw LoadError("missing tensor '" + name + "' (expected shape " + shape_str(shape) + ")");
    }
    if (it->second.shape != shape) {
      throw LoadError("tensor '" + name + "' has shape " + shape_str(it->second.shape) + ", expected " +
                      shape_str(shape));
    }
    taken_.insert(name);
    return reader_(it->second.original);
  }

  void skip(const std::string& name) { taken_.insert(name); }

  Matrix matrix(const std::string& name, std::int64_t rows, std::int64_t cols) {
    const Tensor t = get(name, {rows, cols});
    return Eigen::Map<const Matrix>(t.data.data(), rows, cols);
  }

  RowVector vector(const std::string& name, std::int64_t n) {
    const Tensor t = get(name, {n});
    return Eigen::Map<const RowVector>(t.data.data(), n);
  }

  std::vector<std::string> leftovers() const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_) {
      if (taken_.count(name)) continue;
      // Causal-mask buffers saved by some exporters.
      if (name.ends_with(".attn.bias") || name.ends_with(".attn.masked_bias")) continue;
      out.push_back(e.original);
    }
    return out;
  }

 private:
  struct Entry {
    std::string original;
    std::vector<std::int64_t> shape;
  };
  std::map<std::string, Entry> entries_;
  std::set<std::string> taken_;
  Reader reader_;
};

ModelWeights build_weights(const ModelConfig& config, TensorTaker& take, std::vector<std::string>* unused) {
  config.validate();
  const std::int64_t d = config.d_model, v = config.d_vocab, ctx = config.n_ctx, mlp = config.d_mlp();
  ModelWeights w;
  w.token_embed = take.matrix("wte.weight", v, d);
  w.pos_embed = take.matrix("wpe.weight", ctx, d);
  w.layers.resize(config.n_layer);
  for (int l = 0; l < config.n_layer; ++l) {
    const std::string p = "h." + std::to_string(l) + ".";
    auto& L = w.layers[l];
    L.ln1_weight = take.vector(p + "ln_1.weight", d);
    L.ln1_bias = take.vector(p + "ln_1.bias", d);
    L.attn_qkv = take.matrix(p + "attn.c_attn.weight", d, 3 * d);
    L.attn_qkv_bias = take.vector(p + "attn.c_attn.bias", 3 * d);
    L.attn_out = take.matrix(p + "attn.c_proj.weight", d, d);
    L.attn_out_bias = take.vector(p + "attn.c_proj.bias", d);
    L.ln2_weight = take.vector(p + "ln_2.weight", d);
    L.ln2_bias = take.vector(p + "ln_2.bias", d);
    L.mlp_in = take.matrix(p + "mlp.c_fc.weight", d, mlp);
    L.mlp_in_bias = take.vector(p + "mlp.c_fc.bias", mlp);
    L.mlp_out = take.matrix(p + "mlp.c_proj.weight", mlp, d);
    L.mlp_out_bias = take.vector(p + "mlp.c_proj.bias", d);
  }
  w.ln_f_weight = take.vector("ln_f.weight", d);
  w.ln_f_bias = take.vector("ln_f.bias", d);
  if (!config.tied_unembedding) {
    w.unembed = take.matrix("lm_head.weight", v, d);
  } else if (take.has("lm_head.weight")) {
    // Tied checkpoints sometimes carry an explicit copy of the embedding.
    take.skip("lm_head.weight");
  }
  if (unused != nullptr) *unused = take.leftovers();
  return w;
}

}  // namespace

void ModelConfig::validate() const {
  if (n_layer <= 0 || n_head <= 0 || d_model <= 0 || d_vocab <= 0 || n_ctx <= 0) {
    throw InvalidArgument("model config: n_layer, n_head, d_model, d_vocab and n_ctx must be positive");
  }
  if (d_model % n_head != 0) {
    throw InvalidArgument("model config: d_model " + std::to_string(d_model) + " not divisible by n_head " +
                          std::to_string(n_head));
  }
  if (!(ln_eps > 0.0f)) throw InvalidArgument("model config: ln_eps must be positive");
}

ModelConfig ModelConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open model config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  auto pick = [&](std::initializer_list<const char*> keys) -> const nlohmann::json& {
    for (const char* k : keys) {
      if (j.contains(k)) return j.at(k);
    }
    throw LoadError(path.string() + ": missing key '" + std::string(*keys.begin()) + "'");
  };
  ModelConfig c;
  try {
    c.n_layer = pick({"n_layer"}).get<int>();
    c.n_head = pick({"n_head"}).get<int>();
    c.d_model = pick({"d_model", "n_embd"}).get<int>();
    c.d_vocab = pick({"d_vocab", "vocab_size"}).get<int>();
    c.n_ctx = pick({"n_ctx", "n_positions"}).get<int>();
    if (j.contains("ln_eps") || j.contains("layer_norm_epsilon")) {
      c.ln_eps = pick({"ln_eps", "layer_norm_epsilon"}).get<float>();
    }
    if (j.contains("tie_word_embeddings")) c.tied_unembedding = j.at("tie_word_embeddings").get<bool>();
    if (j.contains("architecture") && j.at("architecture").get<std::string>() != "gpt2") {
      throw LoadError(path.string() + ": unsupported architecture " + j.at("architecture").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  return c;
}

ModelWeights weights_from_tensors(const ModelConfig& config, const NamedTensors& tensors,
                                  std::vector<std::string>* unused) {
  std::map<std::string, std::vector<std::int64_t>> shapes;
  for (const auto& [name, t] : tensors) shapes.emplace(name, t.shape);
  TensorTaker take(std::move(shapes), [&](const std::string& name) { return tensors.at(name); });
  return build_weights(config, take, unused);
}

ModelWeights weights_from_archive(const ModelConfig& config, const TensorArchive& archive,
                                  std::vector<std::string>* unused) {
  std::map<std::string, std::vector<std::int64_t>> shapes;
  for (const auto& info : archive.tensors()) shapes.emplace(info.name, info.shape);
  TensorTaker take(std::move(shapes), [&](const std::string& name) { return archive.read(name); });
  return build_weights(config, take, unused);
}

ModelBundle::ModelBundle(ModelConfig config, ModelWeights weights, std::shared_ptr<const BpeTokenizer> tokenizer,
                         std::string id)
    : config_(config), weights_(std::move(weights)), tokenizer_(std::move(tokenizer)), id_(std::move(id)) {
  config_.validate();
  const auto d = config_.d_model;
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument("model weights: " + what + " has the wrong shape");
  };
  check(weights_.token_embed.rows() == config_.d_vocab && weights_.token_embed.cols() == d, "token_embed");
  check(weights_.pos_embed.rows() == config_.n_ctx && weights_.pos_embed.cols() == d, "pos_embed");
  check(static_cast<int>(weights_.layers.size()) == config_.n_layer, "layers");
  check(weights_.ln_f_weight.size() == d && weights_.ln_f_bias.size() == d, "ln_f");
  for (const auto& L : weights_.layers) {
    check(L.attn_qkv.rows() == d && L.attn_qkv.cols() == 3 * d, "attn_qkv");
    check(L.attn_out.rows() == d && L.attn_out.cols() == d, "attn_out");
    check(L.mlp_in.rows() == d && L.mlp_in.cols() == config_.d_mlp(), "mlp_in");
    check(L.mlp_out.rows() == config_.d_mlp() && L.mlp_out.cols() == d, "mlp_out");
  }
  if (!config_.tied_unembedding) {
    check(weights_.unembed.rows() == config_.d_vocab && weights_.unembed.cols() == d, "unembed");
  }
  if (tokenizer_ && tokenizer_->vocab_size() > static_cast<std::size_t>(config_.d_vocab)) {
    throw InvalidArgument("tokenizer vocabulary (" + std::to_string(tokenizer_->vocab_size()) +
                          ") larger than model d_vocab (" + std::to_string(config_.d_vocab) + ")");
  }
}

const Matrix& ModelBundle::unembedding() const {
  return config_.tied_unembedding ? weights_.token_embed : weights_.unembed;
}

const BpeTokenizer& ModelBundle::tokenizer() const {
  if (!tokenizer_) throw InvalidArgument("model '" + id_ + "' has no tokenizer");
  return *tokenizer_;
}

ModelBundle load_model(const std::filesystem::path& weights_path, const std::filesystem::path& config_path,
                       const std::filesystem::path& tokenizer_dir) {
  const ModelConfig config = ModelConfig::from_json_file(config_path);
  const TensorArchive archive = TensorArchive::open(weights_path);
  std::vector<std::string> unused;
  ModelWeights weights = weights_from_archive(config, archive, &unused);
  auto tokenizer = std::make_shared<const BpeTokenizer>(BpeTokenizer::load(tokenizer_dir));
  std::string id = weights_path.parent_path().filename().string();
  if (id.empty()) id = weights_path.stem().string();
  ModelBundle bundle(config, std::move(weights), std::move(tokenizer), id);
  bundle.set_unused_tensors(std::move(unused));
  return bundle;
}

ModelBundle load_model_dir(const std::filesystem::path& dir, const std::filesystem::path& fallback_tokenizer_dir) {
  const auto tok_dir = std::filesystem::exists(dir / "vocab.json") ? dir : fallback_tokenizer_dir;
  return load_model(dir / "model.safetensors", dir / "config.json", tok_dir);
}

}  // namespace dlens
