// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlens/forward.hpp"
#include "dlens/stimgen.hpp"

namespace dlens {

enum class Outcome { kX, kY, kZ, kOther };

std::string_view to_string(Outcome outcome);

struct OutcomeRecord {
  std::string item_id;
  ItemKind kind = ItemKind::kCritical;
  ConditionFlags flags;
  TokenId argmax = 0;
  std::string decoded;
  Outcome outcome = Outcome::kOther;
};

/// Argmax next token after S1 + " " + S2 prefix, classified by token-id
/// equality against the leading-space tokens of x, y and z. Returns nullopt
/// (with `skip_reason` set) when an entity is not a single token.
std::optional<OutcomeRecord> generation_outcome(const ModelBundle& bundle, const StimulusItem& item,
                                                std::string* skip_reason = nullptr);

/// Classifies an argmax id against candidate entity ids.
Outcome classify_outcome(TokenId argmax, TokenId x, TokenId y, TokenId z);

struct RateRow {
  std::string model_id;
  ItemKind kind = ItemKind::kCritical;
  std::optional<ConditionFlags> flags;  // nullopt for the control row
  std::size_t n_items = 0;
  std::size_t count_x = 0, count_y = 0, count_z = 0, count_other = 0;

  double rate_x() const { return rate(count_x); }
  double rate_y() const { return rate(count_y); }
  double rate_z() const { return rate(count_z); }
  double rate_other() const { return rate(count_other); }
  std::string condition() const { return flags ? flags->label() : "control"; }

 private:
  double rate(std::size_t count) const {
    return n_items == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(n_items);
  }
};

struct GenerationRateTable {
  std::vector<RateRow> rows;  // critical conditions in ConditionFlags::all() order, then control

  const RateRow* find(std::optional<ConditionFlags> flags) const;
};

struct SkippedItem {
  std::string item_id;
  std::string reason;
};

struct BehaviorResult {
  GenerationRateTable table;
  std::vector<OutcomeRecord> outcomes;  // input order, skipped items omitted
  std::vector<SkippedItem> skipped;
};

/// Tallies outcome records into per-(kind, condition) rows.
GenerationRateTable tally_outcomes(std::span<const OutcomeRecord> outcomes, const std::string& model_id);

/// Runs generation_outcome over critical and control items (patching items
/// are ignored) and aggregates. Throws EmptyResult when every item is skipped.
BehaviorResult run_behavior(const ModelBundle& bundle, std::span<const StimulusItem> items, unsigned threads = 1);

struct ContrastGroup {
  std::string name;  // first_match, second_match, halves_match, all_match
  std::vector<std::string> conditions;
  double mean_rate_x = 0.0;
  double control_rate_x = 0.0;
  double difference = 0.0;
};

struct OrderingContrast {
  std::vector<ContrastGroup> groups;
  std::vector<std::string> warnings;
};

/// Critical-minus-control rate_x per ordering group. first/second/halves
/// groups average the conditions where that factor matches, excluding the
/// all-match condition, which forms its own group.
OrderingContrast ordering_contrast(const GenerationRateTable& table);

}  // namespace dlens
