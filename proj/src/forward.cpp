// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/forward.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dlens/error.hpp"

namespace dlens {
namespace {

void layer_norm_rows(const Matrix& x, Eigen::Index row_begin, const RowVector& weight, const RowVector& bias,
                     float eps, Matrix& out) {
  const Eigen::Index rows = x.rows() - row_begin;
  const Eigen::Index d = x.cols();
  out.resize(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const float* src = x.data() + (row_begin + r) * d;
    double mean = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) mean += src[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      const double dev = src[c] - mean;
      var += dev * dev;
    }
    var /= static_cast<double>(d);
    const auto inv = static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    const auto m = static_cast<float>(mean);
    float* dst = out.data() + r * d;
    for (Eigen::Index c = 0; c < d; ++c) dst[c] = (src[c] - m) * inv * weight[c] + bias[c];
  }
}

inline float gelu_tanh(float x) {
  constexpr float kSqrt2OverPi = 0.7978845608028654f;
  return 0.5f * x * (1.0f + std::tanh(kSqrt2OverPi * (x + 0.044715f * x * x * x)));
}

// Causal softmax of one score row in place; keys after `query` get exactly 0.
void causal_softmax_row(float* row, std::size_t query, std::size_t seq_len) {
  float max = row[0];
  for (std::size_t k = 1; k <= query; ++k) max = std::max(max, row[k]);
  double sum = 0.0;
  for (std::size_t k = 0; k <= query; ++k) {
    row[k] = std::exp(row[k] - max);
    sum += row[k];
  }
  const auto inv = static_cast<float>(1.0 / sum);
  for (std::size_t k = 0; k <= query; ++k) row[k] *= inv;
  for (std::size_t k = query + 1; k < seq_len; ++k) row[k] = 0.0f;
}

struct HookPlan {
  // Per block boundary b in [0, n_layer]: resid_post(b - 1) hooks, then
  // resid_pre(b) hooks; overwrites precede captures within a site.
  std::vector<std::vector<const HookSpec*>> at_boundary;
};

int boundary_of(const HookPoint& p) { return p.site == HookSite::kResidPre ? p.layer : p.layer + 1; }

HookPlan plan_hooks(const ModelConfig& config, std::size_t seq_len, std::span<const HookSpec> hooks,
                    int first_boundary) {
  HookPlan plan;
  plan.at_boundary.resize(config.n_layer + 1);
  std::vector<HookPoint> overwritten;
  for (const auto& h : hooks) {
    const auto& p = h.point;
    if (p.layer < 0 || p.layer >= config.n_layer) {
      throw InvalidArgument("hook layer " + std::to_string(p.layer) + " outside [0, " +
                            std::to_string(config.n_layer) + ")");
    }
    if (p.position >= seq_len) {
      throw InvalidArgument("hook position " + std::to_string(p.position) + " outside sequence of length " +
                            std::to_string(seq_len));
    }
    if (h.mode == HookMode::kOverwrite) {
      if (h.vector.size() != static_cast<std::size_t>(config.d_model)) {
        throw InvalidArgument("overwrite vector has " + std::to_string(h.vector.size()) + " values, expected " +
                              std::to_string(config.d_model));
      }
      if (std::find(overwritten.begin(), overwritten.end(), p) != overwritten.end()) {
        throw InvalidArgument("conflicting overwrites at layer " + std::to_string(p.layer) + " position " +
                              std::to_string(p.position));
      }
      overwritten.push_back(p);
    }
    const int b = boundary_of(p);
    if (b < first_boundary) {
      throw InvalidArgument("hook at layer " + std::to_string(p.layer) + " precedes the resume boundary " +
                            std::to_string(first_boundary));
    }
    plan.at_boundary[b].push_back(&h);
  }
  for (auto& list : plan.at_boundary) {
    std::stable_sort(list.begin(), list.end(), [](const HookSpec* a, const HookSpec* b) {
      const int sa = a->point.site == HookSite::kResidPost ? 0 : 1;
      const int sb = b->point.site == HookSite::kResidPost ? 0 : 1;
      if (sa != sb) return sa < sb;
      return a->mode == HookMode::kOverwrite && b->mode == HookMode::kCapture;
    });
  }
  return plan;
}

void apply_boundary(Matrix& x, const std::vector<const HookSpec*>& hooks, ForwardTrace& trace) {
  for (const HookSpec* h : hooks) {
    const auto row = static_cast<Eigen::Index>(h->point.position);
    if (h->mode == HookMode::kOverwrite) {
      x.row(row) = Eigen::Map<const RowVector>(h->vector.data(), x.cols());
    } else {
      std::vector<float> v(x.cols());
      Eigen::Map<RowVector>(v.data(), x.cols()) = x.row(row);
      trace.captured_residuals[h->point] = std::move(v);
    }
  }
}

void run_block(const ModelConfig& cfg, const LayerWeights& L, int layer, Matrix& x, AttentionTensor* attention) {
  const Eigen::Index T = x.rows();
  const Eigen::Index d = cfg.d_model;
  const Eigen::Index dh = cfg.d_head();
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

  Matrix normed;
  layer_norm_rows(x, 0, L.ln1_weight, L.ln1_bias, cfg.ln_eps, normed);
  Matrix qkv = normed * L.attn_qkv;
  qkv.rowwise() += L.attn_qkv_bias;

  Matrix heads(T, d);
  Matrix scores(T, T);
  for (int h = 0; h < cfg.n_head; ++h) {
    const auto q = qkv.middleCols(h * dh, dh);
    const auto k = qkv.middleCols(d + h * dh, dh);
    const auto v = qkv.middleCols(2 * d + h * dh, dh);
    scores.noalias() = (q * k.transpose()) * scale;
    for (Eigen::Index r = 0; r < T; ++r) {
      causal_softmax_row(scores.data() + r * T, static_cast<std::size_t>(r), static_cast<std::size_t>(T));
    }
    heads.middleCols(h * dh, dh).noalias() = scores * v;
    if (attention != nullptr) {
      for (Eigen::Index r = 0; r < T; ++r) {
        auto dst = attention->row(layer, h, static_cast<std::size_t>(r));
        std::copy(scores.data() + r * T, scores.data() + (r + 1) * T, dst.begin());
      }
    }
  }
  x.noalias() += heads * L.attn_out;
  x.rowwise() += L.attn_out_bias;

  layer_norm_rows(x, 0, L.ln2_weight, L.ln2_bias, cfg.ln_eps, normed);
  Matrix hidden = normed * L.mlp_in;
  hidden.rowwise() += L.mlp_in_bias;
  hidden = hidden.unaryExpr([](float v) { return gelu_tanh(v); });
  x.noalias() += hidden * L.mlp_out;
  x.rowwise() += L.mlp_out_bias;
}

void check_ids(const ModelConfig& cfg, std::span<const TokenId> ids) {
  if (ids.empty()) throw InvalidArgument("forward: empty token sequence");
  if (ids.size() > static_cast<std::size_t>(cfg.n_ctx)) {
    throw ContextOverflow("sequence of " + std::to_string(ids.size()) + " tokens exceeds n_ctx " +
                          std::to_string(cfg.n_ctx));
  }
  for (TokenId id : ids) {
    if (id < 0 || id >= cfg.d_vocab) {
      throw InvalidArgument("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(cfg.d_vocab));
    }
  }
}

ForwardTrace run(const ModelBundle& bundle, std::span<const TokenId> ids, int boundary, Matrix x,
                 std::span<const HookSpec> hooks, const ForwardOptions& options) {
  const auto& cfg = bundle.config();
  const auto& w = bundle.weights();
  const std::size_t T = ids.size();
  if (options.logits_from >= T) {
    throw InvalidArgument("logits_from " + std::to_string(options.logits_from) + " beyond sequence end");
  }
  const HookPlan plan = plan_hooks(cfg, T, hooks, boundary);

  ForwardTrace trace;
  trace.seq_len = T;
  if (options.capture_attention) trace.attention.emplace(cfg.n_layer, cfg.n_head, T);
  if (options.keep_boundaries) trace.boundaries.resize(cfg.n_layer + 1);

  for (int b = boundary; b <= cfg.n_layer; ++b) {
    apply_boundary(x, plan.at_boundary[b], trace);
    if (options.keep_boundaries) trace.boundaries[b] = x;
    if (b == cfg.n_layer) break;
    run_block(cfg, w.layers[b], b, x, trace.attention ? &*trace.attention : nullptr);
  }

  Matrix final_normed;
  layer_norm_rows(x, static_cast<Eigen::Index>(options.logits_from), w.ln_f_weight, w.ln_f_bias, cfg.ln_eps,
                  final_normed);
  trace.logits.noalias() = final_normed * bundle.unembedding().transpose();
  trace.logits_offset = options.logits_from;
  return trace;
}

}  // namespace

HookSpec HookSpec::capture(HookSite site, int layer, std::size_t position) {
  return HookSpec{HookPoint{site, layer, position}, HookMode::kCapture, {}};
}

HookSpec HookSpec::overwrite(HookSite site, int layer, std::size_t position, std::vector<float> vector) {
  return HookSpec{HookPoint{site, layer, position}, HookMode::kOverwrite, std::move(vector)};
}

AttentionTensor::AttentionTensor(int n_layer, int n_head, std::size_t seq_len)
    : n_layer_(n_layer),
      n_head_(n_head),
      seq_len_(seq_len),
      data_(static_cast<std::size_t>(n_layer) * n_head * seq_len * seq_len, 0.0f) {}

std::span<const float> ForwardTrace::logits_at(std::size_t position) const {
  if (position < logits_offset || position >= seq_len) {
    throw InvalidArgument("no logits recorded for position " + std::to_string(position));
  }
  const auto row = static_cast<Eigen::Index>(position - logits_offset);
  return {logits.data() + row * logits.cols(), static_cast<std::size_t>(logits.cols())};
}

const std::vector<float>& ForwardTrace::residual(HookSite site, int layer, std::size_t position) const {
  auto it = captured_residuals.find(HookPoint{site, layer, position});
  if (it == captured_residuals.end()) {
    throw InvalidArgument("no residual captured at layer " + std::to_string(layer) + " position " +
                          std::to_string(position));
  }
  return it->second;
}

ForwardTrace forward(const ModelBundle& bundle, std::span<const TokenId> ids, std::size_t logits_from) {
  ForwardOptions options;
  options.logits_from = logits_from;
  return forward_instrumented(bundle, ids, {}, options);
}

ForwardTrace forward_instrumented(const ModelBundle& bundle, std::span<const TokenId> ids,
                                  std::span<const HookSpec> hooks, const ForwardOptions& options) {
  const auto& cfg = bundle.config();
  check_ids(cfg, ids);
  const auto& w = bundle.weights();
  Matrix x(static_cast<Eigen::Index>(ids.size()), cfg.d_model);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    x.row(static_cast<Eigen::Index>(t)) = w.token_embed.row(ids[t]) + w.pos_embed.row(static_cast<Eigen::Index>(t));
  }
  return run(bundle, ids, 0, std::move(x), hooks, options);
}

ForwardTrace forward_from(const ModelBundle& bundle, std::span<const TokenId> ids, int boundary,
                          const Matrix& residual, std::span<const HookSpec> hooks, const ForwardOptions& options) {
  const auto& cfg = bundle.config();
  check_ids(cfg, ids);
  if (boundary < 0 || boundary > cfg.n_layer) {
    throw InvalidArgument("resume boundary " + std::to_string(boundary) + " outside [0, " +
                          std::to_string(cfg.n_layer) + "]");
  }
  if (residual.rows() != static_cast<Eigen::Index>(ids.size()) || residual.cols() != cfg.d_model) {
    throw InvalidArgument("resume residual must be [seq_len, d_model]");
  }
  if (options.capture_attention && boundary > 0) {
    throw InvalidArgument("attention capture requires a full forward pass");
  }
  return run(bundle, ids, boundary, residual, hooks, options);
}

double token_logprob(std::span<const float> logits, TokenId token) {
  if (token < 0 || static_cast<std::size_t>(token) >= logits.size()) {
    throw InvalidArgument("token id " + std::to_string(token) + " outside logit row");
  }
  const float max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (float l : logits) sum += std::exp(static_cast<double>(l) - max);
  return static_cast<double>(logits[token]) - max - std::log(sum);
}

std::vector<double> next_token_distribution(const ForwardTrace& trace) {
  const auto logits = trace.final_logits();
  const float max = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - max);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double continuation_logprob(const ForwardTrace& trace, std::size_t prefix_len, std::span<const TokenId> continuation) {
  if (prefix_len == 0) throw InvalidArgument("continuation_logprob: empty prefix");
  if (continuation.empty()) throw InvalidArgument("continuation_logprob: empty continuation");
  if (prefix_len + continuation.size() != trace.seq_len) {
    throw InvalidArgument("continuation_logprob: trace length does not match prefix + continuation");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < continuation.size(); ++i) {
    total += token_logprob(trace.logits_at(prefix_len - 1 + i), continuation[i]);
  }
  return total;
}

double continuation_logprob(const ModelBundle& bundle, std::span<const TokenId> prefix,
                            std::span<const TokenId> continuation, std::span<const HookSpec> hooks) {
  if (prefix.empty()) throw InvalidArgument("continuation_logprob: empty prefix");
  if (continuation.empty()) throw InvalidArgument("continuation_logprob: empty continuation");
  std::vector<TokenId> ids(prefix.begin(), prefix.end());
  ids.insert(ids.end(), continuation.begin(), continuation.end());
  ForwardOptions options;
  options.logits_from = prefix.size() - 1;
  const ForwardTrace trace = forward_instrumented(bundle, ids, hooks, options);
  return continuation_logprob(trace, prefix.size(), continuation);
}

std::vector<float> unembed_residual(const ModelBundle& bundle, std::span<const float> residual) {
  const auto& cfg = bundle.config();
  if (residual.size() != static_cast<std::size_t>(cfg.d_model)) {
    throw InvalidArgument("unembed_residual: expected d_model values");
  }
  Matrix x = Eigen::Map<const Matrix>(residual.data(), 1, cfg.d_model);
  Matrix normed;
  layer_norm_rows(x, 0, bundle.weights().ln_f_weight, bundle.weights().ln_f_bias, cfg.ln_eps, normed);
  const Matrix logits = normed * bundle.unembedding().transpose();
  return {logits.data(), logits.data() + logits.size()};
}

}  // namespace dlens
