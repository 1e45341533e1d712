// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dlens/behavior.hpp"
#include "dlens/forward.hpp"
#include "dlens/stimgen.hpp"

namespace dlens {

enum class PatchSource { kX1, kX2 };
enum class Suffix { kA, kB };

std::string_view to_string(PatchSource source);
std::string_view to_string(Suffix suffix);

/// Tokenized source/base inputs for one patching item. The token at
/// source_ids[pos_x1], source_ids[pos_x2] and base_ids[pos_target] is the
/// same id, and base_ids ends at pos_target.
struct PatchPair {
  std::string item_id;
  std::vector<TokenId> source_ids;
  std::vector<TokenId> base_ids;
  std::size_t pos_x1 = 0;
  std::size_t pos_x2 = 0;
  std::size_t pos_target = 0;
  std::vector<TokenId> suffix_a_ids;
  std::vector<TokenId> suffix_b_ids;
};

/// Throws InvalidArgument for non-patching items and InvariantViolation when
/// X positions are ambiguous.
PatchPair build_pair(const StimulusItem& item, const BpeTokenizer& tok);

struct PatchOptions {
  HookSite site = HookSite::kResidPost;
  /// Baselines below this probability exclude the item.
  double min_base_probability = 1e-30;
};

struct PatchRecord {
  std::string item_id;
  int layer = 0;
  PatchSource source = PatchSource::kX1;
  Suffix suffix = Suffix::kA;
  double p_base = 0.0;
  double p_patched = 0.0;
  double rel_diff = 0.0;  // p_patched / p_base - 1
};

struct PatchEffect {
  double rel_diff_a = 0.0;
  double rel_diff_b = 0.0;
};

/// Overwrites the residual at (layer, pos_target) of the base run with the
/// source residual at pos_x1 or pos_x2 and scores both suffixes by teacher
/// forcing, the overwrite active in the scoring pass. Throws NumericalError
/// when a baseline probability underflows.
PatchEffect run_patch(const ModelBundle& bundle, const PatchPair& pair, int layer, PatchSource which,
                      const PatchOptions& options = {});

/// All (layer, source, suffix) records for one pair. The unpatched
/// base+suffix pass is run once per suffix; each patched pass resumes from
/// the cached residual stream at the patch boundary.
std::vector<PatchRecord> patch_pair_records(const ModelBundle& bundle, const PatchPair& pair,
                                            std::span<const int> layers, const PatchOptions& options = {});

/// Self-patch: capture the base's own residual at (layer, pos_target) and
/// write it back. Effects should vanish up to float noise.
PatchEffect run_self_patch(const ModelBundle& bundle, const PatchPair& pair, int layer,
                           const PatchOptions& options = {});

struct PatchCell {
  int layer = 0;
  PatchSource source = PatchSource::kX1;
  Suffix suffix = Suffix::kA;
  double mean_rel_diff = 0.0;
  std::size_t n_items = 0;
};

struct PatchSweepResult {
  std::vector<PatchCell> cells;  // ordered by (source, suffix, layer)
  std::vector<PatchRecord> records;
  std::vector<SkippedItem> excluded;
};

/// Mean rel_diff per (layer, source, suffix) over the records.
std::vector<PatchCell> aggregate_patch_records(std::span<const PatchRecord> records, std::span<const int> layers);

PatchSweepResult run_patch_sweep(const ModelBundle& bundle, std::span<const PatchPair> pairs,
                                 std::span<const int> layers, const PatchOptions& options = {},
                                 unsigned threads = 1);

}  // namespace dlens
