// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/behavior.hpp"

#include <algorithm>
#include <map>

#include "dlens/error.hpp"
#include "dlens/parallel.hpp"

namespace dlens {

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kX: return "X";
    case Outcome::kY: return "Y";
    case Outcome::kZ: return "Z";
    case Outcome::kOther: return "OTHER";
  }
  return "OTHER";
}

Outcome classify_outcome(TokenId argmax, TokenId x, TokenId y, TokenId z) {
  if (argmax == x) return Outcome::kX;
  if (argmax == y) return Outcome::kY;
  if (argmax == z) return Outcome::kZ;
  return Outcome::kOther;
}

std::optional<OutcomeRecord> generation_outcome(const ModelBundle& bundle, const StimulusItem& item,
                                                std::string* skip_reason) {
  const auto& tok = bundle.tokenizer();
  TokenId entity_ids[3];
  const std::string* entities[3] = {&item.x, &item.y, &item.z};
  for (int i = 0; i < 3; ++i) {
    const auto ids = tok.encode(" " + *entities[i]);
    if (ids.size() != 1) {
      if (skip_reason) *skip_reason = "entity '" + *entities[i] + "' is not a single token";
      return std::nullopt;
    }
    entity_ids[i] = ids[0];
  }
  const auto ids = tok.encode(item.prompt());
  const ForwardTrace trace = forward(bundle, ids, ids.size() - 1);
  const auto logits = trace.final_logits();
  const auto argmax = static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());

  OutcomeRecord rec;
  rec.item_id = item.id;
  rec.kind = item.kind;
  rec.flags = item.flags;
  rec.argmax = argmax;
  rec.decoded = tok.token_bytes(argmax);
  rec.outcome = classify_outcome(argmax, entity_ids[0], entity_ids[1], entity_ids[2]);
  return rec;
}

const RateRow* GenerationRateTable::find(std::optional<ConditionFlags> flags) const {
  for (const auto& row : rows) {
    if (row.flags == flags) return &row;
  }
  return nullptr;
}

GenerationRateTable tally_outcomes(std::span<const OutcomeRecord> outcomes, const std::string& model_id) {
  std::map<std::string, RateRow> by_condition;
  for (const auto& rec : outcomes) {
    if (rec.kind == ItemKind::kPatching) continue;
    const bool control = rec.kind == ItemKind::kControl;
    const std::string key = control ? "control" : rec.flags.label();
    auto [it, inserted] = by_condition.try_emplace(key);
    RateRow& row = it->second;
    if (inserted) {
      row.model_id = model_id;
      row.kind = rec.kind;
      if (!control) row.flags = rec.flags;
    }
    ++row.n_items;
    switch (rec.outcome) {
      case Outcome::kX: ++row.count_x; break;
      case Outcome::kY: ++row.count_y; break;
      case Outcome::kZ: ++row.count_z; break;
      case Outcome::kOther: ++row.count_other; break;
    }
  }
  GenerationRateTable table;
  for (const auto& flags : ConditionFlags::all()) {
    if (auto it = by_condition.find(flags.label()); it != by_condition.end()) table.rows.push_back(it->second);
  }
  if (auto it = by_condition.find("control"); it != by_condition.end()) table.rows.push_back(it->second);
  return table;
}

BehaviorResult run_behavior(const ModelBundle& bundle, std::span<const StimulusItem> items, unsigned threads) {
  std::vector<const StimulusItem*> selected;
  for (const auto& item : items) {
    if (item.kind != ItemKind::kPatching) selected.push_back(&item);
  }
  if (selected.empty()) throw InvalidArgument("run_behavior: no critical or control items");

  std::vector<std::optional<OutcomeRecord>> slots(selected.size());
  std::vector<std::string> reasons(selected.size());
  parallel_for(selected.size(), threads,
               [&](std::size_t i) { slots[i] = generation_outcome(bundle, *selected[i], &reasons[i]); });

  BehaviorResult result;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (slots[i]) {
      result.outcomes.push_back(std::move(*slots[i]));
    } else {
      result.skipped.push_back({selected[i]->id, reasons[i]});
    }
  }
  if (result.outcomes.empty()) throw EmptyResult("run_behavior: every item was skipped");
  result.table = tally_outcomes(result.outcomes, bundle.id());
  return result;
}

OrderingContrast ordering_contrast(const GenerationRateTable& table) {
  OrderingContrast out;
  const RateRow* control = table.find(std::nullopt);
  if (control == nullptr) throw InvalidArgument("ordering_contrast: table has no control row");

  struct Spec {
    const char* name;
    bool (*member)(const ConditionFlags&);
  };
  const Spec specs[] = {
      {"first_match", [](const ConditionFlags& f) { return f.first_match && !f.all_match(); }},
      {"second_match", [](const ConditionFlags& f) { return f.second_match && !f.all_match(); }},
      {"halves_match", [](const ConditionFlags& f) { return f.halves_match && !f.all_match(); }},
      {"all_match", [](const ConditionFlags& f) { return f.all_match(); }},
  };
  for (const auto& spec : specs) {
    ContrastGroup group;
    group.name = spec.name;
    double sum = 0.0;
    bool complete = true;
    for (const auto& flags : ConditionFlags::all()) {
      if (!spec.member(flags)) continue;
      const RateRow* row = table.find(flags);
      if (row == nullptr) {
        complete = false;
        break;
      }
      group.conditions.push_back(flags.label());
      sum += row->rate_x();
    }
    if (!complete || group.conditions.empty()) {
      out.warnings.push_back(std::string("group ") + spec.name + " omitted: missing member conditions");
      continue;
    }
    group.mean_rate_x = sum / static_cast<double>(group.conditions.size());
    group.control_rate_x = control->rate_x();
    group.difference = group.mean_rate_x - group.control_rate_x;
    out.groups.push_back(std::move(group));
  }
  return out;
}

}  // namespace dlens
