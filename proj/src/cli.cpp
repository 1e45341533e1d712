// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "dlens/attention.hpp"
#include "dlens/behavior.hpp"
#include "dlens/csv.hpp"
#include "dlens/error.hpp"
#include "dlens/figures.hpp"
#include "dlens/manifest.hpp"
#include "dlens/patching.hpp"
#include "dlens/stats.hpp"
#include "dlens/stimgen.hpp"

namespace dlens::cli {
namespace fs = std::filesystem;
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path default_data_dir() {
  if (const char* env = std::getenv("DLENS_DATA_DIR"); env && *env) return env;
  return DLENS_DEFAULT_DATA_DIR;
}

fs::path resolve_model_dir(const std::string& spec) {
  const fs::path direct(spec);
  if (fs::is_directory(direct)) return direct;
  if (const char* root = std::getenv("DISJUNCTION_MODELS_DIR"); root && *root && direct.is_relative()) {
    const fs::path under = fs::path(root) / direct;
    if (fs::is_directory(under)) return under;
  }
  throw LoadError("model directory '" + spec + "' not found (also looked under $DISJUNCTION_MODELS_DIR)");
}

unsigned effective_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<int> parse_layers(const std::string& spec, int n_layer) {
  std::vector<int> layers;
  if (spec == "all") {
    for (int l = 0; l < n_layer; ++l) layers.push_back(l);
    return layers;
  }
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      const auto dash = part.find('-');
      if (dash == std::string::npos) {
        layers.push_back(std::stoi(part));
      } else {
        const int lo = std::stoi(part.substr(0, dash)), hi = std::stoi(part.substr(dash + 1));
        if (lo > hi) throw UsageError("bad layer range '" + part + "'");
        for (int l = lo; l <= hi; ++l) layers.push_back(l);
      }
    } catch (const std::logic_error&) {
      throw UsageError("bad --layers value '" + spec + "'");
    }
  }
  for (int l : layers) {
    if (l < 0 || l >= n_layer) {
      throw UsageError("layer " + std::to_string(l) + " outside [0, " + std::to_string(n_layer) + ")");
    }
  }
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  return layers;
}

/// Accumulates output files for one run and writes them with a manifest.
class OutputDir {
 public:
  OutputDir(fs::path dir, RunManifest manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {
    fs::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw LoadError("cannot write " + (dir_ / name).string());
    out << content;
    manifest_.outputs.push_back(name);
  }

  void finish(const std::string& manifest_name = "manifest.json") {
    manifest_.timestamp = utc_timestamp();
    write_manifest(dir_ / manifest_name, manifest_);
  }

 private:
  fs::path dir_;
  RunManifest manifest_;
};

RunManifest base_manifest(const std::string& command) {
  RunManifest m;
  m.command = command;
  m.version = DLENS_VERSION;
  return m;
}

void describe_model(RunManifest& m, const fs::path& dir) {
  m.model_path = fs::absolute(dir).lexically_normal().string();
  m.model_hash = sha256_file(dir / "model.safetensors");
}

void describe_stimuli(RunManifest& m, const fs::path& path) {
  m.stimulus_path = fs::absolute(path).lexically_normal().string();
  m.stimulus_hash = sha256_file(path);
}

std::string skipped_csv(const std::vector<SkippedItem>& skipped) {
  std::ostringstream os;
  CsvWriter w(os);
  w.row({"item_id", "reason"});
  for (const auto& s : skipped) w.row({s.item_id, s.reason});
  return os.str();
}

// ---- gen-stimuli

struct GenArgs {
  std::uint64_t seed = 0;
  std::size_t n_per_condition = 100;
  std::size_t n_patching = 0;
  bool bridge = false;
  std::string domains;
  std::string tokenizer;
  std::string out;
};

int run_gen(const GenArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path domains = a.domains.empty() ? default_data_dir() / "domains.json" : fs::path(a.domains);
  const fs::path tok_dir = a.tokenizer.empty() ? default_data_dir() / "gpt2" : fs::path(a.tokenizer);
  const auto data = StimulusData::from_json_file(domains);
  const auto tok = BpeTokenizer::load(tok_dir);
  const auto ds = sample_dataset(a.seed, a.n_per_condition, data, tok, {a.n_patching, a.bridge});
  for (const auto& w : ds.warnings) err << "warning: " << w << "\n";

  const fs::path out_path(a.out);
  const fs::path dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  write_jsonl(out_path, ds.items);

  RunManifest m = base_manifest("gen-stimuli");
  m.seed = a.seed;
  describe_stimuli(m, domains);
  m.flags = {{"n_per_condition", std::to_string(a.n_per_condition)},
             {"n_patching", std::to_string(a.n_patching)},
             {"bridge", a.bridge ? "true" : "false"},
             {"tokenizer_sha256", sha256_file(tok_dir / "vocab.json")}};
  m.outputs.push_back(out_path.filename().string());
  m.timestamp = utc_timestamp();
  write_manifest(dir / (out_path.stem().string() + ".manifest.json"), m);
  out << ds.items.size() << " items written to " << out_path.string() << "\n";
  return kExitOk;
}

// ---- run-behavior

struct ModelArgs {
  std::string model;
  std::string tokenizer;
  std::string stimuli;
  std::string out_dir;
  unsigned threads = 0;
};

ModelBundle open_model(const ModelArgs& a, fs::path& model_dir) {
  model_dir = resolve_model_dir(a.model);
  const fs::path tok = a.tokenizer.empty() ? default_data_dir() / "gpt2" : fs::path(a.tokenizer);
  return load_model_dir(model_dir, tok);
}

std::string behavior_items_csv(const BehaviorResult& r) {
  std::ostringstream os;
  CsvWriter w(os);
  w.row({"item_id", "kind", "condition", "first_match", "second_match", "halves_match", "argmax_id",
         "argmax_token", "outcome", "is_x"});
  for (const auto& o : r.outcomes) {
    // Order factors are blank for controls so regressions drop them.
    const bool control = o.kind == ItemKind::kControl;
    auto factor = [&](bool v) { return control ? std::string() : std::string(v ? "1" : "0"); };
    w.row({o.item_id, std::string(to_string(o.kind)), control ? "control" : o.flags.label(),
           factor(o.flags.first_match), factor(o.flags.second_match), factor(o.flags.halves_match),
           std::to_string(o.argmax), o.decoded, std::string(to_string(o.outcome)),
           o.outcome == Outcome::kX ? "1" : "0"});
  }
  return os.str();
}

std::string rates_csv(const GenerationRateTable& t) {
  std::ostringstream os;
  CsvWriter w(os);
  w.row({"model_id", "kind", "condition", "n_items", "count_x", "count_y", "count_z", "count_other", "rate_x",
         "rate_y", "rate_z", "rate_other"});
  for (const auto& r : t.rows) {
    w.row({r.model_id, std::string(to_string(r.kind)), r.condition(), std::to_string(r.n_items),
           std::to_string(r.count_x), std::to_string(r.count_y), std::to_string(r.count_z),
           std::to_string(r.count_other), format_double(r.rate_x()), format_double(r.rate_y()),
           format_double(r.rate_z()), format_double(r.rate_other())});
  }
  return os.str();
}

std::string contrast_csv(const OrderingContrast& c) {
  std::ostringstream os;
  CsvWriter w(os);
  w.row({"group", "conditions", "mean_rate_x", "control_rate_x", "difference"});
  for (const auto& g : c.groups) {
    std::string conds;
    for (const auto& s : g.conditions) conds += (conds.empty() ? "" : ";") + s;
    w.row({g.name, conds, format_double(g.mean_rate_x), format_double(g.control_rate_x),
           format_double(g.difference)});
  }
  return os.str();
}

std::string chisq_csv(const GenerationRateTable& t) {
  std::ostringstream os;
  CsvWriter w(os);
  w.row({"condition", "k_critical", "n_critical", "k_control", "n_control", "chi2", "p_value", "degenerate"});
  const RateRow* control = t.find(std::nullopt);
  if (!control || control->n_items == 0) return os.str();
  for (const auto& r : t.rows) {
    if (!r.flags || r.n_items == 0) continue;
    const auto test = two_proportion_chisq(r.count_x, r.n_items, control->count_x, control->n_items);
    w.row({r.condition(), std::to_string(r.count_x), std::to_string(r.n_items), std::to_string(control->count_x),
           std::to_string(control->n_items), format_double(test.chi2), format_double(test.p_value),
           test.degenerate ? "true" : "false"});
  }
  return os.str();
}

int run_behavior_cmd(const ModelArgs& a, std::ostream& out, std::ostream& err) {
  fs::path model_dir;
  const ModelBundle bundle = open_model(a, model_dir);
  const auto items = read_jsonl(a.stimuli);
  const unsigned threads = effective_threads(a.threads);
  const BehaviorResult result = run_behavior(bundle, items, threads);
  const OrderingContrast contrast = ordering_contrast(result.table);
  for (const auto& w : contrast.warnings) err << "warning: " << w << "\n";
  if (!result.skipped.empty()) err << "warning: " << result.skipped.size() << " items skipped\n";

  RunManifest m = base_manifest("run-behavior");
  describe_model(m, model_dir);
  describe_stimuli(m, a.stimuli);
  OutputDir dir(a.out_dir, m);
  dir.write("items.csv", behavior_items_csv(result));
  dir.write("rates.csv", rates_csv(result.table));
  dir.write("contrast.csv", contrast_csv(contrast));
  dir.write("chisq.csv", chisq_csv(result.table));
  dir.write("skipped.csv", skipped_csv(result.skipped));
  dir.finish();
  out << result.outcomes.size() << " items scored, results in " << a.out_dir << "\n";
  return kExitOk;
}

// ---- run-patching

struct PatchArgs {
  ModelArgs model;
  std::string layers = "all";
  std::string site = "post";
};

int run_patching_cmd(const PatchArgs& a, std::ostream& out, std::ostream& err) {
  fs::path model_dir;
  const ModelBundle bundle = open_model(a.model, model_dir);
  PatchOptions options;
  if (a.site == "post") {
    options.site = HookSite::kResidPost;
  } else if (a.site == "pre") {
    options.site = HookSite::kResidPre;
  } else {
    throw UsageError("--site must be 'post' or 'pre'");
  }
  const auto layers = parse_layers(a.layers, bundle.config().n_layer);
  std::vector<PatchPair> pairs;
  for (const auto& item : read_jsonl(a.model.stimuli)) {
    if (item.kind == ItemKind::kPatching) pairs.push_back(build_pair(item, bundle.tokenizer()));
  }
  if (pairs.empty()) throw InvalidArgument("stimulus file has no patching items");
  const auto result = run_patch_sweep(bundle, pairs, layers, options, effective_threads(a.model.threads));
  if (!result.excluded.empty()) err << "warning: " << result.excluded.size() << " items excluded\n";

  std::ostringstream items, summary;
  CsvWriter wi(items), ws(summary);
  wi.row({"item_id", "layer", "patch_source", "suffix", "P_base", "P_patched", "rel_diff"});
  for (const auto& r : result.records) {
    wi.row({r.item_id, std::to_string(r.layer), std::string(to_string(r.source)), std::string(to_string(r.suffix)),
            format_double(r.p_base), format_double(r.p_patched), format_double(r.rel_diff)});
  }
  ws.row({"layer", "patch_source", "suffix", "mean_rel_diff", "n_items"});
  for (const auto& c : result.cells) {
    ws.row({std::to_string(c.layer), std::string(to_string(c.source)), std::string(to_string(c.suffix)),
            format_double(c.mean_rel_diff), std::to_string(c.n_items)});
  }

  RunManifest m = base_manifest("run-patching");
  describe_model(m, model_dir);
  describe_stimuli(m, a.model.stimuli);
  m.flags = {{"layers", a.layers}, {"site", a.site == "post" ? "resid_post" : "resid_pre"}};
  OutputDir dir(a.model.out_dir, m);
  dir.write("patch_items.csv", items.str());
  dir.write("patch_summary.csv", summary.str());
  dir.write("excluded.csv", skipped_csv(result.excluded));
  dir.finish();
  out << pairs.size() - result.excluded.size() << " items patched, results in " << a.model.out_dir << "\n";
  return kExitOk;
}

// ---- run-attention

struct AttentionArgs {
  ModelArgs model;
  std::uint64_t seed = 0;
  std::size_t n_seq = 50;
  std::size_t half_len = 25;
  std::size_t top_k = 9;
  std::string query = "final_token";
};

int run_attention_cmd(const AttentionArgs& a, std::ostream& out, std::ostream& err) {
  const auto mode = query_mode_from_string(a.query);
  if (!mode) throw UsageError("--query must be 'final_token' or 'entity_generation'");
  fs::path model_dir;
  const ModelBundle bundle = open_model(a.model, model_dir);
  InductionOptions iopts;
  iopts.seed = a.seed;
  iopts.n_sequences = a.n_seq;
  iopts.half_len = a.half_len;
  const auto scores = induction_scores(bundle, iopts);
  if (a.top_k == 0 || a.top_k > scores.size()) throw UsageError("--top-k out of range");
  const auto heads = top_k_heads(scores, a.top_k);
  const auto items = read_jsonl(a.model.stimuli);
  const auto grid = condition_grid(bundle, heads, items, *mode, effective_threads(a.model.threads));
  if (!grid.skipped.empty()) err << "warning: " << grid.skipped.size() << " items skipped\n";

  std::ostringstream sc, top, prof, per;
  CsvWriter wsc(sc), wtop(top), wprof(prof), wper(per);
  wsc.row({"layer", "head", "score"});
  for (const auto& s : scores) wsc.row({std::to_string(s.head.layer), std::to_string(s.head.head), format_double(s.score)});
  wtop.row({"rank", "layer", "head", "score"});
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const auto it = std::find_if(scores.begin(), scores.end(), [&](const HeadScore& s) { return s.head == heads[i]; });
    wtop.row({std::to_string(i + 1), std::to_string(heads[i].layer), std::to_string(heads[i].head),
              format_double(it->score)});
  }
  const std::string query(to_string(*mode));
  wprof.row({"condition", "slot", "mean_mass", "n_items", "query"});
  for (const auto& row : grid.rows) {
    for (EntitySlot s : kAllSlots) {
      wprof.row({row.condition, std::string(to_string(s)), format_double(row.profile[s]), std::to_string(row.n_items),
                 query});
    }
  }
  wper.row({"item_id", "condition", "slot", "mass"});
  for (const auto& ip : grid.items) {
    for (EntitySlot s : kAllSlots) {
      wper.row({ip.item_id, ip.condition, std::string(to_string(s)), format_double(ip.profile[s])});
    }
  }

  RunManifest m = base_manifest("run-attention");
  m.seed = a.seed;
  describe_model(m, model_dir);
  describe_stimuli(m, a.model.stimuli);
  m.flags = {{"n_seq", std::to_string(a.n_seq)},
             {"half_len", std::to_string(a.half_len)},
             {"top_k", std::to_string(a.top_k)},
             {"query", query}};
  OutputDir dir(a.model.out_dir, m);
  dir.write("induction_scores.csv", sc.str());
  dir.write("top_heads.csv", top.str());
  dir.write("profiles.csv", prof.str());
  dir.write("profile_items.csv", per.str());
  dir.write("skipped.csv", skipped_csv(grid.skipped));
  dir.finish();
  out << grid.items.size() << " items profiled over " << heads.size() << " heads, results in " << a.model.out_dir
      << "\n";
  return kExitOk;
}

// ---- stats

int run_chisq(std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2, std::ostream& out) {
  const auto t = two_proportion_chisq(k1, n1, k2, n2);
  nlohmann::ordered_json j;
  j["chi2"] = t.chi2;
  j["p"] = t.p_value;
  j["degenerate"] = t.degenerate;
  out << j.dump() << "\n";
  return kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

int run_logit(const std::string& csv, const std::string& outcome, const std::string& predictors, std::ostream& out) {
  const CsvTable t = read_csv(csv);
  const auto cols = split_list(predictors);
  if (t.rows.empty()) throw InvalidArgument("CSV " + csv + " has no rows");
  // Listwise deletion: rows with a blank field in any used column are dropped.
  std::vector<std::size_t> used_cols{t.column(outcome)};
  for (const auto& c : cols) used_cols.push_back(t.column(c));
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (std::none_of(used_cols.begin(), used_cols.end(), [&](std::size_t c) { return t.rows[r][c].empty(); })) {
      keep.push_back(r);
    }
  }
  if (keep.empty()) throw InvalidArgument("CSV " + csv + " has no complete rows");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(cols.size() + 1));
  Eigen::VectorXd y(static_cast<Eigen::Index>(keep.size()));
  LogitOptions opts;
  opts.column_names.push_back("intercept");
  for (const auto& c : cols) opts.column_names.push_back(c);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    x(i, 0) = 1.0;
    for (std::size_t c = 0; c < cols.size(); ++c) x(i, static_cast<Eigen::Index>(c + 1)) = t.number(keep[k], cols[c]);
    y[i] = t.number(keep[k], outcome);
  }
  const auto fit = logistic_fit(x, y, opts);
  nlohmann::ordered_json j;
  j["model"] = "fixed-effects logistic regression (no random effects)";
  j["n"] = keep.size();
  j["n_dropped"] = t.rows.size() - keep.size();
  j["names"] = fit.names;
  j["coefficients"] = fit.coefficients;
  j["standard_errors"] = fit.standard_errors;
  j["z"] = fit.z_values;
  j["p_values"] = fit.p_values;
  j["converged"] = fit.converged;
  j["n_iter"] = fit.n_iter;
  j["log_likelihood"] = fit.log_likelihood;
  out << j.dump(2) << "\n";
  return kExitOk;
}

void add_model_options(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--model", a.model, "Model directory (model.safetensors + config.json), absolute or under "
                                      "$DISJUNCTION_MODELS_DIR")
      ->required();
  cmd->add_option("--tokenizer", a.tokenizer, "Tokenizer directory used when the model directory has none");
  cmd->add_option("--stimuli", a.stimuli, "Stimulus JSONL from gen-stimuli")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", a.out_dir, "Output directory")->required();
  cmd->add_option("--threads", a.threads, "Worker threads (0 = all cores)");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Disjunction-repetition experiments on GPT-2 family models", "dlens"};
  app.set_version_flag("--version", DLENS_VERSION);
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-stimuli", "Sample critical, control and patching stimuli");
  gen_cmd->add_option("--seed", gen.seed, "Sampling seed")->required();
  gen_cmd->add_option("--n-per-condition", gen.n_per_condition, "Items per condition")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--n-patching", gen.n_patching, "Patching items");
  gen_cmd->add_flag("--bridge", gen.bridge, "Attach the bridge sentence to items");
  gen_cmd->add_option("--domains", gen.domains, "Domain/name data JSON");
  gen_cmd->add_option("--tokenizer", gen.tokenizer, "Tokenizer directory (vocab.json, merges.txt)");
  gen_cmd->add_option("--out", gen.out, "Output JSONL")->required();

  ModelArgs beh;
  auto* beh_cmd = app.add_subcommand("run-behavior", "Argmax generation rates per condition");
  add_model_options(beh_cmd, beh);

  PatchArgs patch;
  auto* patch_cmd = app.add_subcommand("run-patching", "Residual-stream patching sweep");
  add_model_options(patch_cmd, patch.model);
  patch_cmd->add_option("--layers", patch.layers, "'all', or a list like 0-5,8");
  patch_cmd->add_option("--site", patch.site, "Patch site: post (default) or pre");

  AttentionArgs att;
  auto* att_cmd = app.add_subcommand("run-attention", "Induction-head scoring and entity attention profiles");
  add_model_options(att_cmd, att.model);
  att_cmd->add_option("--seed", att.seed, "Seed for the random scoring sequences");
  att_cmd->add_option("--n-seq", att.n_seq, "Scoring sequences");
  att_cmd->add_option("--half-len", att.half_len, "Length of each repeated half");
  att_cmd->add_option("--top-k", att.top_k, "Heads used for profiles");
  att_cmd->add_option("--query", att.query, "Query positions: final_token or entity_generation");

  auto* stats_cmd = app.add_subcommand("stats", "Statistical tests");
  stats_cmd->require_subcommand(1);
  std::size_t k1 = 0, n1 = 0, k2 = 0, n2 = 0;
  auto* chisq_cmd = stats_cmd->add_subcommand("chisq", "Two-proportion chi-square (uncorrected)");
  chisq_cmd->add_option("--k1", k1)->required();
  chisq_cmd->add_option("--n1", n1)->required();
  chisq_cmd->add_option("--k2", k2)->required();
  chisq_cmd->add_option("--n2", n2)->required();
  std::string logit_csv, logit_outcome, logit_predictors;
  auto* logit_cmd = stats_cmd->add_subcommand("logit", "Fixed-effects logistic regression");
  logit_cmd->add_option("--csv", logit_csv)->required()->check(CLI::ExistingFile);
  logit_cmd->add_option("--outcome", logit_outcome)->required();
  logit_cmd->add_option("--predictors", logit_predictors, "Comma-separated numeric columns")->required();

  std::string kind, csv_in, svg_out;
  auto* report_cmd = app.add_subcommand("report", "Render a result CSV as SVG");
  report_cmd->add_option("--kind", kind, "rates-bar, layer-lines or attention-grid")
      ->required()
      ->check(CLI::IsMember({"rates-bar", "layer-lines", "attention-grid"}));
  report_cmd->add_option("--csv", csv_in)->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--svg", svg_out)->required();

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  std::vector<std::string> storage;
  storage.push_back("dlens");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << app.help();
    return kExitUsage;
  }

  if (*gen_cmd) return run_gen(gen, out, err);
  if (*beh_cmd) return run_behavior_cmd(beh, out, err);
  if (*patch_cmd) return run_patching_cmd(patch, out, err);
  if (*att_cmd) return run_attention_cmd(att, out, err);
  if (*chisq_cmd) return run_chisq(k1, n1, k2, n2, out);
  if (*logit_cmd) return run_logit(logit_csv, logit_outcome, logit_predictors, out);
  if (*report_cmd) {
    emit_figure(csv_in, *figure_kind_from_string(kind), svg_out);
    out << "wrote " << svg_out << "\n";
    return kExitOk;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run(args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace dlens::cli
