// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Criteria that
// need pretrained GPT-2 weights look for them under $DISJUNCTION_MODELS_DIR
// (gpt2/ and gpt2-large/) and SKIP when absent.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlens/attention.hpp"
#include "dlens/behavior.hpp"
#include "dlens/cli.hpp"
#include "dlens/error.hpp"
#include "dlens/forward.hpp"
#include "dlens/patching.hpp"
#include "dlens/stats.hpp"
#include "dlens/stimgen.hpp"
#include "support/corpus.hpp"
#include "support/toy_models.hpp"

namespace fs = std::filesystem;
namespace dt = dlens::testing;
using namespace dlens;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Verdict {
  Status status;
  std::string detail;
};

Verdict pass(std::string d) { return {Status::kPass, std::move(d)}; }
Verdict fail(std::string d) { return {Status::kFail, std::move(d)}; }
Verdict skip(std::string d) { return {Status::kSkip, std::move(d)}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Pretrained weights, if provided.
std::optional<fs::path> weights_dir(const std::string& name) {
  const char* root = std::getenv("DISJUNCTION_MODELS_DIR");
  if (root == nullptr || *root == '\0') return std::nullopt;
  const fs::path dir = fs::path(root) / name;
  if (!fs::exists(dir / "model.safetensors") || !fs::exists(dir / "config.json")) return std::nullopt;
  return dir;
}

std::string no_weights(const std::string& name) {
  return "no " + name + " weights (set DISJUNCTION_MODELS_DIR to a directory holding " + name +
         "/model.safetensors and " + name + "/config.json)";
}

ModelBundle load(const fs::path& dir) { return load_model_dir(dir, dt::data_dir() / "gpt2"); }

StimulusData stimulus_data() { return StimulusData::from_json_file(dt::data_dir() / "domains.json"); }

TokenId argmax(std::span<const float> logits) {
  return static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

// Frozen outputs of scripts/hand_model_oracle.py (numpy, float64).
constexpr double kHandLogits01[2][5] = {
    {2.556177120684985, -0.9928378328308519, 0.7658029401374836, -1.122252517705445, -0.8202849196647277},
    {2.8104546964229757, -0.7417722203838444, -0.4473451904506353, -0.7555139328197318, -0.7234499371359944}};

Verdict chisq_reproduction() {
  std::ostringstream out, err;
  const int code = cli::dispatch({"stats", "chisq", "--k1", "86", "--n1", "119", "--k2", "33", "--n2", "117"}, out, err);
  if (code != 0) return fail("stats chisq exited " + std::to_string(code) + ": " + err.str());
  const auto j = nlohmann::json::parse(out.str());
  const double chi2 = j["chi2"].get<double>();
  const double p = j["p"].get<double>();
  const std::string d = "chi2 = " + fmt("%.4f", chi2) + ", p = " + fmt("%.3g", p);
  return std::abs(chi2 - 45.82) <= 0.05 && p < 0.001 ? pass(d) : fail(d);
}

Verdict forward_correctness() {
  const auto hand = dt::hand_model();
  const std::vector<TokenId> ids{0, 1};
  double worst = 0.0;
  const auto trace = forward(hand, ids);
  for (int t = 0; t < 2; ++t) {
    for (int v = 0; v < 5; ++v) worst = std::max(worst, std::abs(trace.logits_at(t)[v] - kHandLogits01[t][v]));
  }
  if (worst > 1e-4) return fail("hand model logits off by " + fmt("%.3g", worst));

  // Causality and attention normalisation on the tiny GPT-2 fixture.
  const auto& tiny = dt::tiny_gpt2();
  const auto short_ids = tiny.tokenizer().encode("Maria will relocate to Paris or Rome");
  auto long_ids = short_ids;
  for (const auto id : tiny.tokenizer().encode(", or London or Berlin, she said.")) long_ids.push_back(id);
  const auto a = forward(tiny, short_ids);
  ForwardOptions opts;
  opts.capture_attention = true;
  const auto b = forward_instrumented(tiny, long_ids, {}, opts);
  double causal = 0.0;
  for (std::size_t t = 0; t < short_ids.size(); ++t) {
    const auto x = a.logits_at(t), y = b.logits_at(t);
    for (std::size_t v = 0; v < x.size(); ++v) causal = std::max(causal, static_cast<double>(std::abs(x[v] - y[v])));
  }
  if (causal > 1e-4) return fail("appending tokens moved earlier logits by " + fmt("%.3g", causal));
  double row_err = 0.0;
  const auto& att = *b.attention;
  for (int l = 0; l < att.n_layer(); ++l) {
    for (int h = 0; h < att.n_head(); ++h) {
      for (std::size_t q = 0; q < att.seq_len(); ++q) {
        double s = 0.0;
        for (const float w : att.row(l, h, q)) s += w;
        row_err = std::max(row_err, std::abs(s - 1.0));
      }
    }
  }
  if (row_err > 1e-5) return fail("attention row sum off by " + fmt("%.3g", row_err));
  return pass("hand logits max err " + fmt("%.2g", worst) + ", causality " + fmt("%.2g", causal) +
              ", row sums " + fmt("%.2g", row_err));
}

Verdict golden_parity() {
  const auto dir = weights_dir("gpt2");
  if (!dir) return skip(no_weights("gpt2"));
  const fs::path golden = dt::test_data_dir() / "gpt2_golden.json";
  if (!fs::exists(golden)) return fail("weights present but " + golden.string() +
                                       " is missing; record it with scripts/record_gpt2_golden.py");
  std::ifstream in(golden);
  const auto j = nlohmann::json::parse(in);
  const auto bundle = load(*dir);
  std::size_t n = 0;
  for (const auto& p : j["prompts"]) {
    auto ids = bundle.tokenizer().encode(p["text"].get<std::string>());
    if (ids != p["ids"].get<std::vector<TokenId>>()) return fail("tokenization differs for '" + p["text"].get<std::string>() + "'");
    const auto expected = p["continuation_ids"].get<std::vector<TokenId>>();
    std::vector<TokenId> got;
    for (std::size_t k = 0; k < expected.size(); ++k) {
      const auto next = argmax(forward(bundle, ids, ids.size() - 1).final_logits());
      got.push_back(next);
      ids.push_back(next);
    }
    if (got != expected) {
      return fail("'" + p["text"].get<std::string>() + "' continued as '" + bundle.tokenizer().decode(got) +
                  "', golden '" + bundle.tokenizer().decode(expected) + "'");
    }
    ++n;
  }
  if (n < 10) return fail("golden file holds " + std::to_string(n) + " prompts, need 10");
  return pass(std::to_string(n) + " prompts match");
}

Verdict tokenizer_criterion() {
  const auto tok = dt::gpt2_tokenizer();
  const auto corpus = dt::fuzz_corpus(20260401, 10000);
  for (const auto& s : corpus) {
    if (tok->decode(tok->encode(s)) != s) return fail("roundtrip failed on a " + std::to_string(s.size()) + "-byte string");
  }
  const auto golden = dt::read_tokenizer_golden(dt::test_data_dir() / "tokenizer_golden.jsonl");
  if (golden.size() != 1000) return fail("golden file has " + std::to_string(golden.size()) + " lines");
  for (std::size_t i = 0; i < golden.size(); ++i) {
    if (tok->encode(golden[i].text) != golden[i].ids) return fail("golden line " + std::to_string(i + 1) + " differs");
  }
  return pass("10000 fuzz roundtrips, 1000 golden lines");
}

// Largest |rel_diff| over every layer and both sites for the given pairs.
double self_patch_error(const ModelBundle& bundle, std::span<const PatchPair> pairs) {
  double worst = 0.0;
  for (const auto& pair : pairs) {
    for (const auto site : {HookSite::kResidPost, HookSite::kResidPre}) {
      PatchOptions opts;
      opts.site = site;
      for (int l = 0; l < bundle.config().n_layer; ++l) {
        const auto e = run_self_patch(bundle, pair, l, opts);
        worst = std::max({worst, std::abs(e.rel_diff_a), std::abs(e.rel_diff_b)});
      }
    }
  }
  return worst;
}

std::vector<PatchPair> patching_pairs(const BpeTokenizer& tok, std::uint64_t seed, std::size_t n) {
  SampleOptions so;
  so.n_patching = n;
  const auto ds = sample_dataset(seed, 0, stimulus_data(), tok, so);
  std::vector<PatchPair> pairs;
  for (const auto& item : ds.items) {
    if (item.kind == ItemKind::kPatching) pairs.push_back(build_pair(item, tok));
  }
  return pairs;
}

Verdict self_patch_identity() {
  const auto& tiny = dt::tiny_gpt2();
  const auto pairs = patching_pairs(tiny.tokenizer(), 11, 10);
  if (pairs.empty()) return fail("no patching items sampled");
  const double tiny_err = self_patch_error(tiny, pairs);
  if (tiny_err >= 1e-4) return fail("fixture self-patch |rel_diff| " + fmt("%.3g", tiny_err));
  std::string d = "fixture max |rel_diff| " + fmt("%.2g", tiny_err);
  const auto dir = weights_dir("gpt2");
  if (!dir) return pass(d + "; gpt2 part not run: " + no_weights("gpt2"));
  const auto bundle = load(*dir);
  const auto small_pairs = patching_pairs(bundle.tokenizer(), 11, 3);
  const double err = self_patch_error(bundle, small_pairs);
  d += ", gpt2 max |rel_diff| " + fmt("%.2g", err);
  return err < 1e-4 ? pass(d) : fail(d);
}

Verdict behavioral_contrast() {
  const auto dir = weights_dir("gpt2-large");
  if (!dir) return skip(no_weights("gpt2-large"));
  const auto bundle = load(*dir);
  const auto ds = sample_dataset(2026, 100, stimulus_data(), bundle.tokenizer());
  std::vector<StimulusItem> items;
  for (const auto& item : ds.items) {
    if (item.kind == ItemKind::kControl || (item.kind == ItemKind::kCritical && item.flags.all_match())) {
      items.push_back(item);
    }
  }
  const auto result = run_behavior(bundle, items, 0);
  const auto* crit = result.table.find(ConditionFlags{});
  const auto* ctrl = result.table.find(std::nullopt);
  if (crit == nullptr || ctrl == nullptr) return fail("missing critical or control rows");
  const auto test = two_proportion_chisq(crit->count_x, crit->n_items, ctrl->count_x, ctrl->n_items);
  const double diff = crit->rate_x() - ctrl->rate_x();
  const std::string d = "rate_x " + fmt("%.3f", crit->rate_x()) + " vs " + fmt("%.3f", ctrl->rate_x()) +
                        ", chi2 = " + fmt("%.3f", test.chi2) + ", p = " + fmt("%.3g", test.p_value);
  return diff > 0 && !test.degenerate && test.p_value < 0.05 ? pass(d) : fail(d);
}

Verdict patching_direction() {
  const auto dir = weights_dir("gpt2-large");
  if (!dir) return skip(no_weights("gpt2-large"));
  const auto bundle = load(*dir);
  const auto pairs = patching_pairs(bundle.tokenizer(), 2027, 50);
  const int n = bundle.config().n_layer;
  std::vector<int> band;
  for (int l = n / 3; l <= 2 * n / 3; ++l) band.push_back(l);
  const auto sweep = run_patch_sweep(bundle, pairs, band, {}, 0);
  const std::size_t used = pairs.size() - sweep.excluded.size();
  if (used < 50) return fail(std::to_string(used) + " items after exclusions, need 50");
  // Band average of each (source, suffix) cell.
  double mean[2][2] = {};
  for (const auto& c : sweep.cells) {
    mean[static_cast<int>(c.source)][static_cast<int>(c.suffix)] += c.mean_rel_diff / static_cast<double>(band.size());
  }
  const std::string d = "layers " + std::to_string(band.front()) + ".." + std::to_string(band.back()) +
                        ": X1 A " + fmt("%.4f", mean[0][0]) + " B " + fmt("%.4f", mean[0][1]) + "; X2 A " +
                        fmt("%.4f", mean[1][0]) + " B " + fmt("%.4f", mean[1][1]);
  return mean[0][0] > mean[0][1] && mean[1][1] > mean[1][0] ? pass(d) : fail(d);
}

InductionOptions induction_options() {
  InductionOptions o;
  o.seed = 2026;
  o.n_sequences = 50;
  o.half_len = 25;
  return o;
}

Verdict induction_heads() {
  const auto dir = weights_dir("gpt2");
  if (!dir) return skip(no_weights("gpt2"));
  const auto bundle = load(*dir);
  const auto scores = induction_scores(bundle, induction_options());
  const auto best = std::max_element(scores.begin(), scores.end(),
                                     [](const HeadScore& a, const HeadScore& b) { return a.score < b.score; });
  const auto count = std::count_if(scores.begin(), scores.end(), [](const HeadScore& s) { return s.score > 0.3; });
  const std::string d = std::to_string(count) + " heads above 0.3, best L" + std::to_string(best->head.layer) + "H" +
                        std::to_string(best->head.head) + " = " + fmt("%.3f", best->score);
  return count >= 1 ? pass(d) : fail(d);
}

Verdict attention_contrast() {
  const auto dir = weights_dir("gpt2-large");
  if (!dir) return skip(no_weights("gpt2-large"));
  const auto bundle = load(*dir);
  const auto heads = top_k_heads(induction_scores(bundle, induction_options()), 9);
  const auto ds = sample_dataset(2028, 100, stimulus_data(), bundle.tokenizer());
  std::vector<StimulusItem> items;
  for (const auto& item : ds.items) {
    if (item.kind == ItemKind::kControl || (item.kind == ItemKind::kCritical && item.flags.all_match())) {
      items.push_back(item);
    }
  }
  const auto grid = condition_grid(bundle, heads, items, QueryMode::kFinalToken, 0);
  const ProfileRow* crit = nullptr;
  const ProfileRow* ctrl = nullptr;
  for (const auto& row : grid.rows) {
    if (row.condition == "TTT") crit = &row;
    if (row.condition == "control") ctrl = &row;
  }
  if (crit == nullptr || ctrl == nullptr) return fail("missing critical or control rows");
  const double a = crit->profile[EntitySlot::kXSecond];
  const double b = ctrl->profile[EntitySlot::kXSecond];
  const std::string d = "second-X mass " + fmt("%.4f", a) + " (n = " + std::to_string(crit->n_items) + ") vs " +
                        fmt("%.4f", b) + " (n = " + std::to_string(ctrl->n_items) + ")";
  return a > b ? pass(d) : fail(d);
}

Verdict statistics_properties() {
  const Eigen::Vector3d beta(-0.5, 1.0, -0.75);
  const int n = 10000;
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = normal(rng);
    x(i, 2) = unif(rng) < 0.5 ? 1.0 : 0.0;
    const double p = 1.0 / (1.0 + std::exp(-x.row(i).dot(beta)));
    y(i) = unif(rng) < p ? 1.0 : 0.0;
  }
  const auto fit = logistic_fit(x, y);
  double err = 0.0;
  for (int k = 0; k < 3; ++k) err = std::max(err, std::abs(fit.coefficients[k] - beta(k)));
  if (!fit.converged || err > 0.1) return fail("coefficient error " + fmt("%.4f", err));
  const auto& trace = fit.log_likelihood_trace;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] < trace[i - 1] - 1e-9) return fail("log-likelihood decreased at iteration " + std::to_string(i));
  }

  Eigen::MatrixXd sx(20, 2);
  Eigen::VectorXd sy(20);
  for (int i = 0; i < 20; ++i) {
    sx(i, 0) = 1.0;
    sx(i, 1) = i;
    sy(i) = i >= 10 ? 1.0 : 0.0;
  }
  try {
    logistic_fit(sx, sy);
    return fail("separated data fitted without error");
  } catch (const NumericalError&) {
  }
  return pass("max |beta error| " + fmt("%.4f", err) + ", " + std::to_string(trace.size()) +
              " monotone log-likelihood steps, separation detected");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "dlens_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  auto run = [](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::dispatch(args, out, err);
    if (code != 0) throw std::runtime_error(args[0] + " exited " + std::to_string(code) + ": " + err.str());
  };
  std::string stim_bytes[2];
  for (int rep = 0; rep < 2; ++rep) {
    const auto path = root / ("stim" + std::to_string(rep) + ".jsonl");
    run({"gen-stimuli", "--seed", "7", "--n-per-condition", "3", "--n-patching", "3", "--out", path.string()});
    stim_bytes[rep] = slurp(path);
  }
  if (stim_bytes[0] != stim_bytes[1]) return fail("gen-stimuli output differs between runs");
  const std::string stim = (root / "stim0.jsonl").string();
  const std::string model = (dt::test_data_dir() / "tiny_gpt2").string();

  const std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> drivers{
      {{"run-behavior"}, {"items.csv", "rates.csv", "contrast.csv", "chisq.csv", "skipped.csv"}},
      {{"run-patching", "--layers", "all"}, {"patch_items.csv", "patch_summary.csv", "excluded.csv"}},
      {{"run-attention", "--seed", "3", "--n-seq", "4", "--half-len", "10", "--top-k", "3"},
       {"induction_scores.csv", "top_heads.csv", "profiles.csv", "profile_items.csv", "skipped.csv"}},
  };
  std::size_t compared = 0;
  for (const auto& [cmd, files] : drivers) {
    for (int rep = 0; rep < 2; ++rep) {
      auto args = cmd;
      const std::vector<std::string> rest{"--model", model, "--stimuli", stim, "--out-dir",
                                          (root / (cmd[0] + std::to_string(rep))).string(),
                                          "--threads", rep == 0 ? "1" : "3"};
      args.insert(args.end(), rest.begin(), rest.end());
      run(args);
    }
    for (const auto& f : files) {
      const auto a = slurp(root / (cmd[0] + "0") / f);
      const auto b = slurp(root / (cmd[0] + "1") / f);
      if (a != b) return fail(cmd[0] + " " + f + " differs between runs");
      ++compared;
    }
  }
  fs::remove_all(root);
  return pass("gen-stimuli and " + std::to_string(compared) + " driver CSVs byte-identical");
}

struct Criterion {
  int number;
  const char* name;
  double budget_s;
  std::function<Verdict()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "chi-square reproduction", 1, chisq_reproduction},
      {2, "forward-pass correctness", 5, forward_correctness},
      {3, "golden parity (weights)", 60, golden_parity},
      {4, "tokenizer", 10, tokenizer_criterion},
      {5, "self-patch identity", 120, self_patch_identity},
      {6, "behavioral contrast (weights)", 1800, behavioral_contrast},
      {7, "patching direction (weights)", 3600, patching_direction},
      {8, "induction heads exist (weights)", 120, induction_heads},
      {9, "attention contrast (weights)", 900, attention_contrast},
      {10, "statistics properties", 30, statistics_properties},
      {11, "determinism", 600, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (v.status == Status::kPass && secs > c.budget_s) {
      v = fail(v.detail + "; took " + fmt("%.1f", secs) + " s, budget " + fmt("%.0f", c.budget_s) + " s");
    }
    const char* tag = v.status == Status::kPass ? "PASS" : v.status == Status::kFail ? "FAIL" : "SKIP";
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", tag, c.number, c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += v.status == Status::kFail;
  }
  return failures == 0 ? 0 : 1;
}
