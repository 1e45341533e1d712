// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlens/tokenizer.hpp"

namespace dlens {

struct EntityDomain {
  std::string name;
  std::vector<std::string> entities;
  std::string verb_phrase;    // e.g. "relocate to {}"; the slot must come last
  std::string gerund_phrase;  // e.g. "visiting {}", used by control items
  std::string suffix_a;       // bound to the first half of a critical S1
  std::string suffix_b;       // bound to the second half

  /// Throws InvalidArgument on a missing/misplaced slot or equal suffixes.
  void validate() const;
  bool contains(std::string_view entity) const;
};

struct AgentName {
  std::string name;
  std::optional<std::string> pronoun;

  /// S2 subject: the pronoun when known, else the name.
  const std::string& subject() const { return pronoun ? *pronoun : name; }
};

struct StimulusTemplates {
  /// S2 disjunction, rendered after the verb; must end with the connective.
  std::string s2_disjunction = "{x} or {y}, or {z} or";
  /// Optional bridge between S1 and S2 ({agent} placeholder).
  std::string bridge = "A friend asks {agent} which options are possibilities. {agent} replies:";
};

struct StimulusData {
  std::vector<EntityDomain> domains;
  std::vector<AgentName> names;
  StimulusTemplates templates;

  static StimulusData from_json_file(const std::filesystem::path& path);
  static StimulusData from_json_string(std::string_view text);

  const EntityDomain& domain(std::string_view name) const;
  AgentName agent(std::string_view name) const;
};

/// The three binary factors of the critical design. All-true is the full
/// match between S1 and S2 order.
struct ConditionFlags {
  bool first_match = true;   // S1 first disjunction "X or Y" (else "Y or X")
  bool second_match = true;  // S1 second disjunction "Z or X" (else "X or Z")
  bool halves_match = true;  // S1 halves in S2 order (else swapped)

  bool all_match() const { return first_match && second_match && halves_match; }
  /// "TTF"-style label in (first, second, halves) order.
  std::string label() const;
  static std::optional<ConditionFlags> from_label(std::string_view label);
  /// All eight settings, TTT first, in descending binary order.
  static std::array<ConditionFlags, 8> all();

  auto operator<=>(const ConditionFlags&) const = default;
};

enum class ItemKind { kCritical, kControl, kPatching };

std::string_view to_string(ItemKind kind);
std::optional<ItemKind> item_kind_from_string(std::string_view s);

/// Source/base renderings for the residual patching design. Offsets are byte
/// offsets of the entity's first character.
struct PatchingLayout {
  std::string source_text;  // S1 + " " + S2 in Y X Z X order
  std::string base_text;    // source + " {subject} will {verb} X"
  std::size_t x1_offset = 0;
  std::size_t x2_offset = 0;
  std::size_t target_offset = 0;
  std::string continuation_a;  // " " + suffix_a
  std::string continuation_b;
};

struct StimulusItem {
  std::string id;
  ItemKind kind = ItemKind::kCritical;
  std::string domain;
  std::string agent;
  std::string x, y, z;
  ConditionFlags flags;
  std::string s1_text;
  std::string s2_prefix;
  std::string answer;
  std::optional<std::string> bridge;
  std::optional<PatchingLayout> patching;

  /// S1 and the S2 prefix joined by one space; the bridge is never included.
  std::string prompt() const { return s1_text + " " + s2_prefix; }
};

StimulusItem build_critical(const EntityDomain& domain, const AgentName& agent, const std::string& x,
                            const std::string& y, const std::string& z, ConditionFlags flags,
                            const StimulusTemplates& templates = {});

StimulusItem build_control(const EntityDomain& domain, const AgentName& agent, const std::string& x,
                           const std::string& y, const std::string& z, const std::string& repeated,
                           const StimulusTemplates& templates = {});

StimulusItem build_patching_item(const EntityDomain& domain, const AgentName& agent, const std::string& x,
                                 const std::string& y, const std::string& z, const StimulusTemplates& templates = {});

struct SampleOptions {
  std::size_t n_patching = 0;
  bool with_bridge = false;
};

struct SampledDataset {
  std::vector<StimulusItem> items;
  std::vector<std::string> warnings;  // skipped domains
};

/// n_per_condition (domain, agent, x, y, z) tuples are drawn without
/// replacement; each tuple is rendered in all eight critical conditions and
/// once as a control (repeated entity = x), so controls share domain and
/// entities with the critical items. Entities are restricted to those whose
/// leading-space form is a single token. A pure function of `seed`.
SampledDataset sample_dataset(std::uint64_t seed, std::size_t n_per_condition, const StimulusData& data,
                              const BpeTokenizer& tok, const SampleOptions& options = {});

/// Byte offsets of whole-word occurrences of `word` in `text`.
std::vector<std::size_t> find_word_offsets(std::string_view text, std::string_view word);

/// Index of the token whose decoded bytes cover byte `offset` of the text
/// that produced `ids`.
std::optional<std::size_t> token_index_at_offset(const BpeTokenizer& tok, std::span<const TokenId> ids,
                                                 std::size_t offset);

std::string to_json_line(const StimulusItem& item);
StimulusItem from_json_line(std::string_view line);
void write_jsonl(const std::filesystem::path& path, std::span<const StimulusItem> items);
std::vector<StimulusItem> read_jsonl(const std::filesystem::path& path);

}  // namespace dlens
