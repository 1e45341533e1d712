// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/patching.hpp"

#include <cmath>
#include <map>
#include <optional>

#include "dlens/error.hpp"
#include "dlens/parallel.hpp"

namespace dlens {
namespace {

std::size_t single_position(const BpeTokenizer& tok, std::span<const TokenId> ids, std::size_t offset,
                            TokenId expected, const std::string& what, const std::string& item_id) {
  const auto pos = token_index_at_offset(tok, ids, offset);
  if (!pos || ids[*pos] != expected) {
    throw InvariantViolation("item " + item_id + ": " + what + " is not the entity token");
  }
  return *pos;
}

int boundary_for(HookSite site, int layer) { return site == HookSite::kResidPre ? layer : layer + 1; }

struct SuffixRun {
  std::vector<TokenId> ids;
  ForwardTrace clean;
  double logprob_base = 0.0;
};

SuffixRun clean_suffix_run(const ModelBundle& bundle, const PatchPair& pair, std::span<const TokenId> suffix) {
  SuffixRun run;
  run.ids = pair.base_ids;
  run.ids.insert(run.ids.end(), suffix.begin(), suffix.end());
  ForwardOptions opts;
  opts.logits_from = pair.base_ids.size() - 1;
  opts.keep_boundaries = true;
  run.clean = forward_instrumented(bundle, run.ids, {}, opts);
  run.logprob_base = continuation_logprob(run.clean, pair.base_ids.size(), suffix);
  return run;
}

double patched_logprob(const ModelBundle& bundle, const PatchPair& pair, const SuffixRun& run,
                       std::span<const TokenId> suffix, HookSite site, int layer, std::vector<float> vector) {
  const int boundary = boundary_for(site, layer);
  const HookSpec hook = HookSpec::overwrite(site, layer, pair.pos_target, std::move(vector));
  ForwardOptions opts;
  opts.logits_from = pair.base_ids.size() - 1;
  const ForwardTrace trace =
      forward_from(bundle, run.ids, boundary, run.clean.boundaries[boundary], std::span(&hook, 1), opts);
  return continuation_logprob(trace, pair.base_ids.size(), suffix);
}

void check_layer(const ModelBundle& bundle, int layer) {
  if (layer < 0 || layer >= bundle.config().n_layer) {
    throw InvalidArgument("patch layer " + std::to_string(layer) + " outside [0, " +
                          std::to_string(bundle.config().n_layer) + ")");
  }
}

void check_baseline(const PatchPair& pair, double p_base, const PatchOptions& options, Suffix suffix) {
  if (!(p_base >= options.min_base_probability)) {
    throw NumericalError("item " + pair.item_id + ": baseline probability of suffix " +
                         std::string(to_string(suffix)) + " underflows");
  }
}

}  // namespace

std::string_view to_string(PatchSource source) { return source == PatchSource::kX1 ? "X1" : "X2"; }
std::string_view to_string(Suffix suffix) { return suffix == Suffix::kA ? "A" : "B"; }

PatchPair build_pair(const StimulusItem& item, const BpeTokenizer& tok) {
  if (item.kind != ItemKind::kPatching || !item.patching) {
    throw InvalidArgument("item " + item.id + " is not a patching item");
  }
  const auto& layout = *item.patching;
  const auto x_ids = tok.encode(" " + item.x);
  if (x_ids.size() != 1) throw InvalidArgument("item " + item.id + ": entity '" + item.x + "' is not a single token");
  const TokenId x = x_ids[0];

  PatchPair pair;
  pair.item_id = item.id;
  pair.source_ids = tok.encode(layout.source_text);
  pair.base_ids = tok.encode(layout.base_text);
  pair.suffix_a_ids = tok.encode(layout.continuation_a);
  pair.suffix_b_ids = tok.encode(layout.continuation_b);

  // X1/X2 are the last two X tokens of the source (both inside S2).
  const auto in_source = locate_occurrences(pair.source_ids, x);
  if (in_source.size() < 2) throw InvariantViolation("item " + item.id + ": fewer than two X tokens in source");
  pair.pos_x1 = in_source[in_source.size() - 2];
  pair.pos_x2 = in_source[in_source.size() - 1];
  pair.pos_target = pair.base_ids.size() - 1;

  const std::size_t by_offset_x1 = single_position(tok, pair.source_ids, layout.x1_offset, x, "X1", item.id);
  const std::size_t by_offset_x2 = single_position(tok, pair.source_ids, layout.x2_offset, x, "X2", item.id);
  const std::size_t by_offset_target = single_position(tok, pair.base_ids, layout.target_offset, x, "target", item.id);
  if (by_offset_x1 != pair.pos_x1 || by_offset_x2 != pair.pos_x2 || by_offset_target != pair.pos_target) {
    throw InvariantViolation("item " + item.id + ": ambiguous X positions");
  }
  if (!(pair.pos_x1 < pair.pos_x2)) throw InvariantViolation("item " + item.id + ": X1 must precede X2");
  if (pair.suffix_a_ids.empty() || pair.suffix_b_ids.empty()) {
    throw InvalidArgument("item " + item.id + ": empty continuation");
  }
  return pair;
}

std::vector<PatchRecord> patch_pair_records(const ModelBundle& bundle, const PatchPair& pair,
                                            std::span<const int> layers, const PatchOptions& options) {
  for (int layer : layers) check_layer(bundle, layer);

  std::vector<HookSpec> captures;
  for (int layer : layers) {
    captures.push_back(HookSpec::capture(options.site, layer, pair.pos_x1));
    captures.push_back(HookSpec::capture(options.site, layer, pair.pos_x2));
  }
  ForwardOptions source_opts;
  source_opts.logits_from = pair.source_ids.size() - 1;
  const ForwardTrace source = forward_instrumented(bundle, pair.source_ids, captures, source_opts);

  std::vector<PatchRecord> records;
  const std::pair<Suffix, const std::vector<TokenId>*> suffixes[] = {{Suffix::kA, &pair.suffix_a_ids},
                                                                     {Suffix::kB, &pair.suffix_b_ids}};
  for (const auto& [suffix, ids] : suffixes) {
    const SuffixRun run = clean_suffix_run(bundle, pair, *ids);
    const double p_base = std::exp(run.logprob_base);
    check_baseline(pair, p_base, options, suffix);
    for (int layer : layers) {
      for (PatchSource which : {PatchSource::kX1, PatchSource::kX2}) {
        const std::size_t pos = which == PatchSource::kX1 ? pair.pos_x1 : pair.pos_x2;
        const double lp = patched_logprob(bundle, pair, run, *ids, options.site, layer,
                                          source.residual(options.site, layer, pos));
        PatchRecord rec;
        rec.item_id = pair.item_id;
        rec.layer = layer;
        rec.source = which;
        rec.suffix = suffix;
        rec.p_base = p_base;
        rec.p_patched = std::exp(lp);
        rec.rel_diff = rec.p_patched / rec.p_base - 1.0;
        records.push_back(rec);
      }
    }
  }
  return records;
}

PatchEffect run_patch(const ModelBundle& bundle, const PatchPair& pair, int layer, PatchSource which,
                      const PatchOptions& options) {
  const int layers[] = {layer};
  PatchEffect effect;
  for (const auto& rec : patch_pair_records(bundle, pair, layers, options)) {
    if (rec.source != which) continue;
    (rec.suffix == Suffix::kA ? effect.rel_diff_a : effect.rel_diff_b) = rec.rel_diff;
  }
  return effect;
}

PatchEffect run_self_patch(const ModelBundle& bundle, const PatchPair& pair, int layer, const PatchOptions& options) {
  check_layer(bundle, layer);
  const HookSpec capture = HookSpec::capture(options.site, layer, pair.pos_target);
  const ForwardTrace base = forward_instrumented(bundle, pair.base_ids, std::span(&capture, 1));
  const auto& own = base.residual(options.site, layer, pair.pos_target);

  PatchEffect effect;
  for (Suffix suffix : {Suffix::kA, Suffix::kB}) {
    const auto& ids = suffix == Suffix::kA ? pair.suffix_a_ids : pair.suffix_b_ids;
    const double lp_base = continuation_logprob(bundle, pair.base_ids, ids);
    const HookSpec hook = HookSpec::overwrite(options.site, layer, pair.pos_target, own);
    const double lp_patched = continuation_logprob(bundle, pair.base_ids, ids, std::span(&hook, 1));
    check_baseline(pair, std::exp(lp_base), options, suffix);
    (suffix == Suffix::kA ? effect.rel_diff_a : effect.rel_diff_b) = std::exp(lp_patched) / std::exp(lp_base) - 1.0;
  }
  return effect;
}

std::vector<PatchCell> aggregate_patch_records(std::span<const PatchRecord> records, std::span<const int> layers) {
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<std::tuple<int, int, int>, Acc> acc;
  for (const auto& r : records) {
    auto& a = acc[{static_cast<int>(r.source), static_cast<int>(r.suffix), r.layer}];
    a.sum += r.rel_diff;
    ++a.n;
  }
  std::vector<PatchCell> cells;
  for (PatchSource source : {PatchSource::kX1, PatchSource::kX2}) {
    for (Suffix suffix : {Suffix::kA, Suffix::kB}) {
      for (int layer : layers) {
        PatchCell cell;
        cell.layer = layer;
        cell.source = source;
        cell.suffix = suffix;
        if (auto it = acc.find({static_cast<int>(source), static_cast<int>(suffix), layer}); it != acc.end()) {
          cell.n_items = it->second.n;
          cell.mean_rel_diff = it->second.sum / static_cast<double>(it->second.n);
        }
        cells.push_back(cell);
      }
    }
  }
  return cells;
}

PatchSweepResult run_patch_sweep(const ModelBundle& bundle, std::span<const PatchPair> pairs,
                                 std::span<const int> layers, const PatchOptions& options, unsigned threads) {
  if (pairs.empty()) throw InvalidArgument("run_patch_sweep: no pairs");
  std::vector<std::vector<PatchRecord>> per_pair(pairs.size());
  std::vector<std::optional<std::string>> failures(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    try {
      per_pair[i] = patch_pair_records(bundle, pairs[i], layers, options);
    } catch (const NumericalError& e) {
      failures[i] = e.what();
    }
  });
  PatchSweepResult result;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (failures[i]) {
      result.excluded.push_back({pairs[i].item_id, *failures[i]});
      continue;
    }
    result.records.insert(result.records.end(), per_pair[i].begin(), per_pair[i].end());
  }
  result.cells = aggregate_patch_records(result.records, layers);
  return result;
}

}  // namespace dlens
