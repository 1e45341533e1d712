// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlens/behavior.hpp"
#include "dlens/forward.hpp"
#include "dlens/stimgen.hpp"

namespace dlens {

struct HeadId {
  int layer = 0;
  int head = 0;

  auto operator<=>(const HeadId&) const = default;
};

struct HeadScore {
  HeadId head;
  double score = 0.0;
};

struct InductionOptions {
  std::uint64_t seed = 0;
  std::size_t n_sequences = 50;
  std::size_t half_len = 25;
  /// Prepended to every sequence. Defaults to the tokenizer's end-of-text
  /// token when the bundle has one.
  std::optional<TokenId> bos;
  /// Never drawn, in addition to the BOS token.
  std::vector<TokenId> excluded;
};

/// The random-repeat sequences used for scoring: BOS (if any) followed by
/// s ++ s, where s holds half_len distinct ids drawn uniformly from the
/// non-excluded vocabulary.
std::vector<std::vector<TokenId>> induction_sequences(const ModelBundle& bundle, const InductionOptions& options);

/// Mean attention from each second-half position t to t - half_len + 1 (the
/// token that followed the earlier occurrence of the current token), per
/// head, averaged over sequences. One score per head in (layer, head) order.
std::vector<HeadScore> induction_scores(const ModelBundle& bundle, const InductionOptions& options);

/// The k highest-scoring heads; equal scores are ordered by (layer, head).
std::vector<HeadId> top_k_heads(std::span<const HeadScore> scores, std::size_t k);

enum class QueryMode {
  kFinalToken,        // last prompt token only
  kEntityGeneration,  // the final token plus each position that predicts an S2 entity
};

std::string_view to_string(QueryMode mode);
std::optional<QueryMode> query_mode_from_string(std::string_view s);

/// Key slots in S1, by textual position: the earlier X, Y, Z, the later X,
/// and everything else.
enum class EntitySlot { kXFirst, kY, kZ, kXSecond, kOther };
inline constexpr std::array<EntitySlot, 5> kAllSlots = {EntitySlot::kXFirst, EntitySlot::kY, EntitySlot::kZ,
                                                         EntitySlot::kXSecond, EntitySlot::kOther};
std::string_view to_string(EntitySlot slot);

/// Attention mass per slot, averaged over heads and query positions. Slots
/// partition the keys, so masses sum to one.
struct AttentionProfile {
  std::array<double, 5> mass{};

  double operator[](EntitySlot slot) const { return mass[static_cast<std::size_t>(slot)]; }
  double total() const;
};

/// Profile for one item. Control items have no second X; their kXSecond
/// slot is the repeated "especially" mention. Returns nullopt with a reason
/// when the S1 entity positions cannot be identified.
std::optional<AttentionProfile> entity_attention_profile(const ModelBundle& bundle, std::span<const HeadId> heads,
                                                         const StimulusItem& item, QueryMode mode,
                                                         std::string* skip_reason = nullptr);

struct ProfileRow {
  std::string condition;  // flags label or "control"
  std::size_t n_items = 0;
  AttentionProfile profile;
};

struct ItemProfile {
  std::string item_id;
  std::string condition;
  AttentionProfile profile;
};

struct ConditionGrid {
  std::vector<ProfileRow> rows;  // ConditionFlags::all() order, then control
  std::vector<ItemProfile> items;
  std::vector<SkippedItem> skipped;
};

ConditionGrid condition_grid(const ModelBundle& bundle, std::span<const HeadId> heads,
                             std::span<const StimulusItem> items, QueryMode mode, unsigned threads = 1);

}  // namespace dlens
