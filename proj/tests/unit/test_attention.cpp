// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <set>

#include "dlens/attention.hpp"
#include "dlens/error.hpp"
#include "support/toy_models.hpp"

using namespace dlens;
using Catch::Approx;
namespace dt = dlens::testing;

namespace {

const StimulusData& data() {
  static const StimulusData d = StimulusData::from_json_file(dt::data_dir() / "domains.json");
  return d;
}

}  // namespace

TEST_CASE("hand-built induction circuit scores one") {
  const auto bundle = dt::induction_toy(20, 16);
  InductionOptions opts;
  opts.seed = 3;
  opts.n_sequences = 20;
  opts.half_len = 7;
  opts.bos = 0;
  const auto scores = induction_scores(bundle, opts);
  REQUIRE(scores.size() == 2);
  CHECK(scores[1].head == HeadId{1, 0});
  CHECK(scores[1].score == Approx(1.0).margin(1e-3));
  CHECK(scores[0].score < 0.2);
  CHECK(top_k_heads(scores, 1) == std::vector<HeadId>{{1, 0}});
}

TEST_CASE("induction sequences are repeated distinct draws after BOS") {
  const auto& bundle = dt::tiny_gpt2();
  InductionOptions opts;
  opts.seed = 1;
  opts.n_sequences = 5;
  opts.half_len = 25;
  opts.excluded = {0, 1, 2};
  const auto seqs = induction_sequences(bundle, opts);
  REQUIRE(seqs.size() == 5);
  for (const auto& s : seqs) {
    REQUIRE(s.size() == 51);
    CHECK(s[0] == 50256);
    std::set<TokenId> distinct(s.begin() + 1, s.begin() + 26);
    CHECK(distinct.size() == 25);
    CHECK(std::equal(s.begin() + 1, s.begin() + 26, s.begin() + 26));
    for (std::size_t i = 1; i < s.size(); ++i) {
      CHECK(s[i] != 50256);
      CHECK(s[i] > 2);
    }
  }
  CHECK(induction_sequences(bundle, opts) == seqs);
  opts.half_len = 64;
  CHECK_THROWS_AS(induction_sequences(bundle, opts), ContextOverflow);
}

TEST_CASE("induction scores are probabilities") {
  const auto& bundle = dt::tiny_gpt2();
  InductionOptions opts;
  opts.n_sequences = 4;
  opts.half_len = 10;
  for (const auto& s : induction_scores(bundle, opts)) {
    CHECK(s.score >= 0.0);
    CHECK(s.score <= 1.0);
  }
}

TEST_CASE("top-k ordering and ties") {
  const std::vector<HeadScore> scores{{{0, 0}, 0.5}, {{0, 1}, 0.9}, {{1, 0}, 0.5}, {{1, 1}, 0.1}, {{2, 0}, 0.9}};
  CHECK(top_k_heads(scores, 3) == std::vector<HeadId>{{0, 1}, {2, 0}, {0, 0}});
  CHECK(top_k_heads(scores, 5).size() == 5);
  CHECK_THROWS_AS(top_k_heads(scores, 6), InvalidArgument);

  // Shuffling the list and relabelling heads consistently relabels the output.
  std::vector<HeadScore> many;
  std::mt19937_64 rng(4);
  for (int l = 0; l < 12; ++l)
    for (int h = 0; h < 12; ++h) many.push_back({{l, h}, std::uniform_int_distribution<int>(0, 9)(rng) / 10.0});
  const auto base = top_k_heads(many, 9);
  auto relabel = [](HeadId id) { return HeadId{11 - id.layer, id.head}; };
  std::vector<HeadScore> shuffled = many;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto& s : shuffled) s.head = relabel(s.head);
  const auto got = top_k_heads(shuffled, 9);
  std::vector<HeadScore> expected_scores;
  for (const auto& s : many) expected_scores.push_back({relabel(s.head), s.score});
  CHECK(got == top_k_heads(expected_scores, 9));
  std::multiset<double> a, b;
  for (auto id : base) a.insert(std::find_if(many.begin(), many.end(), [&](auto& s) { return s.head == id; })->score);
  for (auto id : got) b.insert(std::find_if(shuffled.begin(), shuffled.end(), [&](auto& s) { return s.head == id; })->score);
  CHECK(a == b);
}

TEST_CASE("uniform attention spreads mass evenly over entity positions") {
  const auto bundle = dt::uniform_attention_model();
  const std::vector<HeadId> heads{{0, 0}, {1, 1}};
  for (const auto& flags : ConditionFlags::all()) {
    const auto item = build_critical(data().domain("countries"), data().agent("Mary"), "France", "Spain", "Germany", flags);
    const auto p = entity_attention_profile(bundle, heads, item, QueryMode::kFinalToken);
    REQUIRE(p);
    const std::size_t len = bundle.tokenizer().encode(item.prompt()).size();
    for (EntitySlot s : {EntitySlot::kXFirst, EntitySlot::kY, EntitySlot::kZ, EntitySlot::kXSecond}) {
      CHECK((*p)[s] == Approx(1.0 / len).margin(1e-6));
    }
    CHECK(p->total() == Approx(1.0).margin(1e-5));
  }
}

TEST_CASE("profiles sum to one in both query modes") {
  const auto& bundle = dt::tiny_gpt2();
  const std::vector<HeadId> heads{{0, 1}, {1, 0}};
  const auto ds = sample_dataset(6, 2, data(), bundle.tokenizer());
  for (QueryMode mode : {QueryMode::kFinalToken, QueryMode::kEntityGeneration}) {
    for (const auto& item : ds.items) {
      const auto p = entity_attention_profile(bundle, heads, item, mode);
      REQUIRE(p);
      CHECK(p->total() == Approx(1.0).margin(1e-5));
      for (double m : p->mass) {
        CHECK(m >= 0.0);
        CHECK(m <= 1.0 + 1e-6);
      }
    }
  }
}

TEST_CASE("condition grid means recount from the per-item log") {
  const auto& bundle = dt::tiny_gpt2();
  const std::vector<HeadId> heads{{1, 0}, {1, 1}};
  const auto ds = sample_dataset(8, 3, data(), bundle.tokenizer(), {.n_patching = 1});
  const auto grid = condition_grid(bundle, heads, ds.items, QueryMode::kFinalToken, 2);
  REQUIRE(grid.rows.size() == 9);
  CHECK(grid.rows.back().condition == "control");
  CHECK(grid.items.size() == 27);
  for (const auto& row : grid.rows) {
    std::array<double, 5> sum{};
    std::size_t n = 0;
    for (const auto& ip : grid.items) {
      if (ip.condition != row.condition) continue;
      for (std::size_t s = 0; s < 5; ++s) sum[s] += ip.profile.mass[s];
      ++n;
    }
    CHECK(n == row.n_items);
    for (std::size_t s = 0; s < 5; ++s) CHECK(row.profile.mass[s] == Approx(sum[s] / n).margin(1e-12));
  }

  const std::vector<StimulusItem> single{ds.items.front()};
  const auto one = condition_grid(bundle, heads, single, QueryMode::kFinalToken);
  REQUIRE(one.rows.size() == 1);
  const auto direct = entity_attention_profile(bundle, heads, single.front(), QueryMode::kFinalToken);
  for (std::size_t s = 0; s < 5; ++s) CHECK(one.rows[0].profile.mass[s] == direct->mass[s]);
}

TEST_CASE("items without identifiable entity positions are skipped") {
  const auto& bundle = dt::tiny_gpt2();
  const std::vector<HeadId> heads{{0, 0}};
  const auto item = build_critical(data().domain("countries"), data().agent("Mary"), "Liechtenstein", "Spain", "Germany", {});
  std::string reason;
  CHECK_FALSE(entity_attention_profile(bundle, heads, item, QueryMode::kFinalToken, &reason));
  CHECK_FALSE(reason.empty());
  const std::vector<HeadId> bad{{5, 0}};
  CHECK_THROWS_AS(entity_attention_profile(bundle, bad, item, QueryMode::kFinalToken), InvalidArgument);
}
