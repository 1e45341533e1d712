// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/attention.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <unordered_set>

#include "dlens/error.hpp"
#include "dlens/parallel.hpp"

namespace dlens {
namespace {

std::optional<TokenId> default_bos(const ModelBundle& bundle, const InductionOptions& options) {
  if (options.bos) return options.bos;
  if (bundle.has_tokenizer()) return bundle.tokenizer().end_of_text();
  return std::nullopt;
}

void check_heads(const ModelBundle& bundle, std::span<const HeadId> heads) {
  if (heads.empty()) throw InvalidArgument("no attention heads given");
  for (const auto& h : heads) {
    if (h.layer < 0 || h.layer >= bundle.config().n_layer || h.head < 0 || h.head >= bundle.config().n_head) {
      throw InvalidArgument("head (" + std::to_string(h.layer) + ", " + std::to_string(h.head) + ") out of range");
    }
  }
}

bool fail(std::string* reason, std::string text) {
  if (reason) *reason = std::move(text);
  return false;
}

struct SlotPositions {
  std::size_t s1_end = 0;  // first token of S2
  std::array<std::size_t, 4> keys{};  // X first, Y, Z, X second
  std::vector<std::size_t> queries;
};

bool locate_slots(const BpeTokenizer& tok, const StimulusItem& item, std::span<const TokenId> ids, QueryMode mode,
                  SlotPositions& out, std::string* reason) {
  TokenId entity[3];
  const std::string* names[3] = {&item.x, &item.y, &item.z};
  for (int i = 0; i < 3; ++i) {
    const auto e = tok.encode(" " + *names[i]);
    if (e.size() != 1) return fail(reason, "entity '" + *names[i] + "' is not a single token");
    entity[i] = e[0];
  }
  const auto s2_start = token_index_at_offset(tok, ids, item.s1_text.size());
  if (!s2_start) return fail(reason, "cannot locate the S1/S2 boundary");
  out.s1_end = *s2_start;

  const std::span<const TokenId> s1(ids.data(), out.s1_end);
  const auto xs = locate_occurrences(s1, entity[0]);
  const auto ys = locate_occurrences(s1, entity[1]);
  const auto zs = locate_occurrences(s1, entity[2]);
  if (xs.size() != 2 || ys.size() != 1 || zs.size() != 1) {
    return fail(reason, "S1 entity tokens are not X twice, Y once and Z once");
  }
  out.keys = {xs[0], ys[0], zs[0], xs[1]};

  out.queries.clear();
  if (mode == QueryMode::kEntityGeneration) {
    for (std::size_t p = out.s1_end + 1; p < ids.size(); ++p) {
      if (ids[p] == entity[0] || ids[p] == entity[1] || ids[p] == entity[2]) out.queries.push_back(p - 1);
    }
  }
  out.queries.push_back(ids.size() - 1);
  return true;
}

}  // namespace

std::vector<std::vector<TokenId>> induction_sequences(const ModelBundle& bundle, const InductionOptions& options) {
  const auto& cfg = bundle.config();
  if (options.half_len < 2) throw InvalidArgument("induction half_len must be at least 2");
  if (options.n_sequences == 0) throw InvalidArgument("induction n_sequences must be positive");
  const auto bos = default_bos(bundle, options);
  const std::size_t len = 2 * options.half_len + (bos ? 1 : 0);
  if (len > static_cast<std::size_t>(cfg.n_ctx)) {
    throw ContextOverflow("induction sequence length " + std::to_string(len) + " exceeds n_ctx " +
                          std::to_string(cfg.n_ctx));
  }
  std::unordered_set<TokenId> excluded(options.excluded.begin(), options.excluded.end());
  if (bos) excluded.insert(*bos);
  std::size_t allowed = 0;
  for (TokenId t = 0; t < cfg.d_vocab; ++t) allowed += excluded.count(t) == 0;
  if (allowed < options.half_len) throw InvalidArgument("vocabulary too small for distinct induction tokens");

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<TokenId> draw(0, cfg.d_vocab - 1);
  std::vector<std::vector<TokenId>> out;
  out.reserve(options.n_sequences);
  for (std::size_t s = 0; s < options.n_sequences; ++s) {
    std::vector<TokenId> half;
    std::unordered_set<TokenId> used;
    while (half.size() < options.half_len) {
      const TokenId t = draw(rng);
      if (excluded.count(t) || !used.insert(t).second) continue;
      half.push_back(t);
    }
    std::vector<TokenId> seq;
    seq.reserve(len);
    if (bos) seq.push_back(*bos);
    seq.insert(seq.end(), half.begin(), half.end());
    seq.insert(seq.end(), half.begin(), half.end());
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<HeadScore> induction_scores(const ModelBundle& bundle, const InductionOptions& options) {
  const auto& cfg = bundle.config();
  const auto sequences = induction_sequences(bundle, options);
  const std::size_t offset = default_bos(bundle, options) ? 1 : 0;
  const std::size_t half = options.half_len;

  std::vector<double> sums(static_cast<std::size_t>(cfg.n_layer) * cfg.n_head, 0.0);
  ForwardOptions opts;
  opts.capture_attention = true;
  for (const auto& seq : sequences) {
    opts.logits_from = seq.size() - 1;
    const ForwardTrace trace = forward_instrumented(bundle, seq, {}, opts);
    const auto& attn = *trace.attention;
    for (int l = 0; l < cfg.n_layer; ++l) {
      for (int h = 0; h < cfg.n_head; ++h) {
        double acc = 0.0;
        for (std::size_t t = offset + half; t < offset + 2 * half; ++t) acc += attn.at(l, h, t, t - half + 1);
        sums[static_cast<std::size_t>(l) * cfg.n_head + h] += acc / static_cast<double>(half);
      }
    }
  }
  std::vector<HeadScore> scores;
  scores.reserve(sums.size());
  for (int l = 0; l < cfg.n_layer; ++l) {
    for (int h = 0; h < cfg.n_head; ++h) {
      scores.push_back({{l, h}, sums[static_cast<std::size_t>(l) * cfg.n_head + h] /
                                    static_cast<double>(sequences.size())});
    }
  }
  return scores;
}

std::vector<HeadId> top_k_heads(std::span<const HeadScore> scores, std::size_t k) {
  if (k > scores.size()) {
    throw InvalidArgument("top_k_heads: k = " + std::to_string(k) + " exceeds " + std::to_string(scores.size()) +
                          " heads");
  }
  std::vector<HeadScore> sorted(scores.begin(), scores.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const HeadScore& a, const HeadScore& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.head < b.head;
  });
  std::vector<HeadId> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(sorted[i].head);
  return out;
}

std::string_view to_string(QueryMode mode) {
  return mode == QueryMode::kFinalToken ? "final_token" : "entity_generation";
}

std::optional<QueryMode> query_mode_from_string(std::string_view s) {
  if (s == "final_token" || s == "final") return QueryMode::kFinalToken;
  if (s == "entity_generation" || s == "entity") return QueryMode::kEntityGeneration;
  return std::nullopt;
}

std::string_view to_string(EntitySlot slot) {
  switch (slot) {
    case EntitySlot::kXFirst: return "X_first";
    case EntitySlot::kY: return "Y";
    case EntitySlot::kZ: return "Z";
    case EntitySlot::kXSecond: return "X_second";
    case EntitySlot::kOther: return "other";
  }
  return "other";
}

double AttentionProfile::total() const {
  double s = 0.0;
  for (double m : mass) s += m;
  return s;
}

std::optional<AttentionProfile> entity_attention_profile(const ModelBundle& bundle, std::span<const HeadId> heads,
                                                         const StimulusItem& item, QueryMode mode,
                                                         std::string* skip_reason) {
  check_heads(bundle, heads);
  if (item.kind == ItemKind::kPatching) throw InvalidArgument("item " + item.id + " is a patching item");
  const auto& tok = bundle.tokenizer();
  const auto ids = tok.encode(item.prompt());
  SlotPositions slots;
  if (!locate_slots(tok, item, ids, mode, slots, skip_reason)) return std::nullopt;

  ForwardOptions opts;
  opts.capture_attention = true;
  opts.logits_from = ids.size() - 1;
  const ForwardTrace trace = forward_instrumented(bundle, ids, {}, opts);
  const auto& attn = *trace.attention;

  AttentionProfile profile;
  for (const auto& h : heads) {
    for (std::size_t q : slots.queries) {
      const auto row = attn.row(h.layer, h.head, q);
      double row_total = 0.0;
      for (std::size_t k = 0; k <= q; ++k) row_total += row[k];
      double in_slots = 0.0;
      for (std::size_t s = 0; s < 4; ++s) {
        profile.mass[s] += row[slots.keys[s]];
        in_slots += row[slots.keys[s]];
      }
      profile.mass[4] += row_total - in_slots;
    }
  }
  const double n = static_cast<double>(heads.size() * slots.queries.size());
  for (double& m : profile.mass) m /= n;
  return profile;
}

ConditionGrid condition_grid(const ModelBundle& bundle, std::span<const HeadId> heads,
                             std::span<const StimulusItem> items, QueryMode mode, unsigned threads) {
  check_heads(bundle, heads);
  std::vector<const StimulusItem*> usable;
  for (const auto& item : items) {
    if (item.kind != ItemKind::kPatching) usable.push_back(&item);
  }
  std::vector<std::optional<AttentionProfile>> profiles(usable.size());
  std::vector<std::string> reasons(usable.size());
  parallel_for(usable.size(), threads, [&](std::size_t i) {
    profiles[i] = entity_attention_profile(bundle, heads, *usable[i], mode, &reasons[i]);
  });

  ConditionGrid grid;
  std::map<std::string, ProfileRow> rows;
  for (std::size_t i = 0; i < usable.size(); ++i) {
    const auto& item = *usable[i];
    if (!profiles[i]) {
      grid.skipped.push_back({item.id, reasons[i]});
      continue;
    }
    const std::string condition = item.kind == ItemKind::kControl ? "control" : item.flags.label();
    grid.items.push_back({item.id, condition, *profiles[i]});
    auto& row = rows[condition];
    row.condition = condition;
    ++row.n_items;
    for (std::size_t s = 0; s < 5; ++s) row.profile.mass[s] += profiles[i]->mass[s];
  }
  if (grid.items.empty()) throw EmptyResult("condition_grid: every item was skipped");
  auto emit = [&](const std::string& condition) {
    auto it = rows.find(condition);
    if (it == rows.end()) return;
    for (double& m : it->second.profile.mass) m /= static_cast<double>(it->second.n_items);
    grid.rows.push_back(it->second);
  };
  for (const auto& flags : ConditionFlags::all()) emit(flags.label());
  emit("control");
  return grid;
}

}  // namespace dlens
