// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "dlens/model.hpp"

namespace dlens {

/// resid_pre(l) is the residual stream entering block l; resid_post(l) the
/// stream leaving it. resid_post(l) and resid_pre(l + 1) hold the same values
/// but are distinct hook sites; at a shared boundary post hooks run first.
enum class HookSite { kResidPre, kResidPost };
enum class HookMode { kCapture, kOverwrite };

struct HookPoint {
  HookSite site = HookSite::kResidPost;
  int layer = 0;
  std::size_t position = 0;

  auto operator<=>(const HookPoint&) const = default;
};

struct HookSpec {
  HookPoint point;
  HookMode mode = HookMode::kCapture;
  std::vector<float> vector;  // d_model values, overwrite only

  static HookSpec capture(HookSite site, int layer, std::size_t position);
  static HookSpec overwrite(HookSite site, int layer, std::size_t position, std::vector<float> vector);
};

/// Attention probabilities laid out [layer][head][query][key].
class AttentionTensor {
 public:
  AttentionTensor() = default;
  AttentionTensor(int n_layer, int n_head, std::size_t seq_len);

  float at(int layer, int head, std::size_t query, std::size_t key) const {
    return data_[index(layer, head, query, key)];
  }
  std::span<const float> row(int layer, int head, std::size_t query) const {
    return {data_.data() + index(layer, head, query, 0), seq_len_};
  }
  std::span<float> row(int layer, int head, std::size_t query) {
    return {data_.data() + index(layer, head, query, 0), seq_len_};
  }

  int n_layer() const { return n_layer_; }
  int n_head() const { return n_head_; }
  std::size_t seq_len() const { return seq_len_; }

 private:
  std::size_t index(int layer, int head, std::size_t q, std::size_t k) const {
    return ((static_cast<std::size_t>(layer) * n_head_ + head) * seq_len_ + q) * seq_len_ + k;
  }

  int n_layer_ = 0;
  int n_head_ = 0;
  std::size_t seq_len_ = 0;
  std::vector<float> data_;
};

struct ForwardOptions {
  bool capture_attention = false;
  /// Logits are produced for positions >= logits_from only (0 = all).
  std::size_t logits_from = 0;
  /// Keep the full residual stream at every block boundary (n_layer + 1
  /// matrices of [seq_len, d_model]) for later `forward_from` calls.
  bool keep_boundaries = false;
};

struct ForwardTrace {
  std::map<HookPoint, std::vector<float>> captured_residuals;
  std::optional<AttentionTensor> attention;
  Matrix logits;  // [seq_len - logits_offset, d_vocab]
  std::size_t logits_offset = 0;
  std::size_t seq_len = 0;
  std::vector<Matrix> boundaries;

  std::span<const float> logits_at(std::size_t position) const;
  std::span<const float> final_logits() const { return logits_at(seq_len - 1); }
  const std::vector<float>& residual(HookSite site, int layer, std::size_t position) const;
};

ForwardTrace forward(const ModelBundle& bundle, std::span<const TokenId> ids, std::size_t logits_from = 0);

/// Forward pass with capture/overwrite hooks. Captures record the value that
/// flows downstream, i.e. after any overwrite at the same site. With no hooks
/// and no attention capture the result is bit-identical to `forward`.
ForwardTrace forward_instrumented(const ModelBundle& bundle, std::span<const TokenId> ids,
                                  std::span<const HookSpec> hooks, const ForwardOptions& options = {});

/// Resumes a pass from block boundary `boundary` (0 = before block 0,
/// n_layer = after the last block) given the residual stream there, e.g. one
/// of `ForwardTrace::boundaries`. Hooks at that boundary are applied first;
/// hooks at earlier sites are rejected. Layers before the boundary are not
/// recomputed, so a patch at resid_post(l) costs n_layer - l - 1 blocks.
ForwardTrace forward_from(const ModelBundle& bundle, std::span<const TokenId> ids, int boundary,
                          const Matrix& residual, std::span<const HookSpec> hooks,
                          const ForwardOptions& options = {});

/// Softmax of the final-position logits, in double precision.
std::vector<double> next_token_distribution(const ForwardTrace& trace);

/// log-softmax of one logit row at `token`.
double token_logprob(std::span<const float> logits, TokenId token);

/// Sum over continuation tokens of log p(token | prefix, earlier continuation
/// tokens), from one teacher-forced pass over the concatenation.
double continuation_logprob(const ModelBundle& bundle, std::span<const TokenId> prefix,
                            std::span<const TokenId> continuation, std::span<const HookSpec> hooks = {});

/// Same quantity read off a trace of prefix ++ continuation.
double continuation_logprob(const ForwardTrace& trace, std::size_t prefix_len,
                            std::span<const TokenId> continuation);

/// Final layer norm and unembedding applied to one residual vector.
std::vector<float> unembed_residual(const ModelBundle& bundle, std::span<const float> residual);

}  // namespace dlens
