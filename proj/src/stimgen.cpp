// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/stimgen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "dlens/error.hpp"

namespace dlens {
namespace {

using nlohmann::json;

constexpr std::string_view kSlot = "{}";

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || (c & 0x80); }

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    text.replace(pos, key.size(), value);
    pos += value.size();
  }
  return text;
}

std::string fill_slot(const std::string& phrase, std::string_view filler) {
  return replace_all(phrase, kSlot, filler);
}

void check_entities(const EntityDomain& domain, const std::string& x, const std::string& y, const std::string& z) {
  if (x == y || y == z || x == z) {
    throw InvalidArgument("entities must be pairwise distinct: " + x + ", " + y + ", " + z);
  }
  for (const auto* e : {&x, &y, &z}) {
    if (!domain.contains(*e)) throw InvalidArgument("entity '" + *e + "' not in domain '" + domain.name + "'");
  }
}

std::size_t count_word(std::string_view text, std::string_view word) { return find_word_offsets(text, word).size(); }

std::string render_s2_prefix(const EntityDomain& domain, const AgentName& agent, const std::string& x,
                             const std::string& y, const std::string& z, const StimulusTemplates& templates) {
  std::string disj = replace_all(replace_all(replace_all(templates.s2_disjunction, "{x}", x), "{y}", y), "{z}", z);
  return agent.subject() + " will " + fill_slot(domain.verb_phrase, disj);
}

// Verifies entity counts; a failure means an entity also occurs in template
// text, which the caller supplied.
void check_counts(const StimulusItem& item, std::size_t want_x_s1) {
  auto fail = [&](const std::string& what) {
    throw InvalidArgument("item " + item.id + ": " + what + " (entity collides with template wording?)");
  };
  if (count_word(item.s1_text, item.x) != want_x_s1) fail("S1 must contain '" + item.x + "' exactly " + std::to_string(want_x_s1) + " times");
  if (count_word(item.s1_text, item.y) != 1) fail("S1 must contain '" + item.y + "' once");
  if (count_word(item.s1_text, item.z) != 1) fail("S1 must contain '" + item.z + "' once");
  for (const auto* e : {&item.x, &item.y, &item.z}) {
    if (count_word(item.s2_prefix, *e) == 0) fail("S2 prefix lacks '" + *e + "'");
  }
  if (!item.s2_prefix.ends_with(" or")) fail("S2 prefix must end with the connective 'or'");
}

std::string item_key(ItemKind kind, const std::string& domain, const std::string& agent, const std::string& x,
                     const std::string& y, const std::string& z, const std::string& tag) {
  return std::string(to_string(kind)) + ":" + domain + ":" + agent + ":" + x + "-" + y + "-" + z + ":" + tag;
}

EntityDomain parse_domain(const json& j) {
  EntityDomain d;
  d.name = j.at("name").get<std::string>();
  d.entities = j.at("entities").get<std::vector<std::string>>();
  d.verb_phrase = j.at("verb_phrase").get<std::string>();
  d.gerund_phrase = j.value("gerund_phrase", std::string("considering {}"));
  d.suffix_a = j.at("suffix_a").get<std::string>();
  d.suffix_b = j.at("suffix_b").get<std::string>();
  d.validate();
  return d;
}

json flags_json(const ConditionFlags& f) {
  return {{"first_match", f.first_match}, {"second_match", f.second_match}, {"halves_match", f.halves_match}};
}

}  // namespace

void EntityDomain::validate() const {
  if (name.empty()) throw InvalidArgument("domain without a name");
  for (const auto* phrase : {&verb_phrase, &gerund_phrase}) {
    const auto first = phrase->find(kSlot);
    if (first == std::string::npos || first != phrase->rfind(kSlot) || !phrase->ends_with(kSlot)) {
      throw InvalidArgument("domain '" + name + "': phrase '" + *phrase + "' must end with a single {} slot");
    }
  }
  if (suffix_a.empty() || suffix_a == suffix_b) {
    throw InvalidArgument("domain '" + name + "': suffix_a and suffix_b must be distinct and non-empty");
  }
  std::set<std::string> unique(entities.begin(), entities.end());
  if (unique.size() != entities.size()) throw InvalidArgument("domain '" + name + "': duplicate entities");
}

bool EntityDomain::contains(std::string_view entity) const {
  return std::find(entities.begin(), entities.end(), entity) != entities.end();
}

StimulusData StimulusData::from_json_string(std::string_view text) {
  StimulusData data;
  try {
    const json j = json::parse(text);
    for (const auto& d : j.at("domains")) data.domains.push_back(parse_domain(d));
    for (const auto& n : j.at("names")) {
      AgentName a;
      a.name = n.at("name").get<std::string>();
      if (n.contains("pronoun") && n.at("pronoun").is_string()) a.pronoun = n.at("pronoun").get<std::string>();
      data.names.push_back(std::move(a));
    }
    if (j.contains("templates")) {
      const auto& t = j.at("templates");
      data.templates.s2_disjunction = t.value("s2_disjunction", data.templates.s2_disjunction);
      data.templates.bridge = t.value("bridge", data.templates.bridge);
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("stimulus data: ") + e.what());
  }
  if (data.names.empty()) throw LoadError("stimulus data: no names");
  return data;
}

StimulusData StimulusData::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open stimulus data " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

const EntityDomain& StimulusData::domain(std::string_view name) const {
  for (const auto& d : domains) {
    if (d.name == name) return d;
  }
  throw InvalidArgument("unknown domain '" + std::string(name) + "'");
}

AgentName StimulusData::agent(std::string_view name) const {
  for (const auto& n : names) {
    if (n.name == name) return n;
  }
  return AgentName{std::string(name), std::nullopt};
}

std::string ConditionFlags::label() const {
  std::string s;
  s += first_match ? 'T' : 'F';
  s += second_match ? 'T' : 'F';
  s += halves_match ? 'T' : 'F';
  return s;
}

std::optional<ConditionFlags> ConditionFlags::from_label(std::string_view label) {
  if (label.size() != 3) return std::nullopt;
  ConditionFlags f;
  bool* fields[3] = {&f.first_match, &f.second_match, &f.halves_match};
  for (int i = 0; i < 3; ++i) {
    if (label[i] == 'T') {
      *fields[i] = true;
    } else if (label[i] == 'F') {
      *fields[i] = false;
    } else {
      return std::nullopt;
    }
  }
  return f;
}

std::array<ConditionFlags, 8> ConditionFlags::all() {
  std::array<ConditionFlags, 8> out{};
  for (int i = 0; i < 8; ++i) {
    const int bits = 7 - i;
    out[i] = ConditionFlags{(bits & 4) != 0, (bits & 2) != 0, (bits & 1) != 0};
  }
  return out;
}

std::string_view to_string(ItemKind kind) {
  switch (kind) {
    case ItemKind::kCritical: return "critical";
    case ItemKind::kControl: return "control";
    case ItemKind::kPatching: return "patching";
  }
  return "critical";
}

std::optional<ItemKind> item_kind_from_string(std::string_view s) {
  if (s == "critical") return ItemKind::kCritical;
  if (s == "control") return ItemKind::kControl;
  if (s == "patching") return ItemKind::kPatching;
  return std::nullopt;
}

std::vector<std::size_t> find_word_offsets(std::string_view text, std::string_view word) {
  std::vector<std::size_t> out;
  if (word.empty()) return out;
  std::size_t pos = 0;
  while ((pos = text.find(word, pos)) != std::string_view::npos) {
    const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right_ok = end == text.size() || !is_word_char(text[end]);
    if (left_ok && right_ok) out.push_back(pos);
    ++pos;
  }
  return out;
}

StimulusItem build_critical(const EntityDomain& domain, const AgentName& agent, const std::string& x,
                            const std::string& y, const std::string& z, ConditionFlags flags,
                            const StimulusTemplates& templates) {
  check_entities(domain, x, y, z);
  const std::string first = flags.first_match ? x + " or " + y : y + " or " + x;
  const std::string second = flags.second_match ? z + " or " + x : x + " or " + z;
  const std::string half_a = first + " " + domain.suffix_a;
  const std::string half_b = second + " " + domain.suffix_b;
  const std::string body = flags.halves_match ? half_a + ", or " + half_b : half_b + ", or " + half_a;

  StimulusItem item;
  item.kind = ItemKind::kCritical;
  item.domain = domain.name;
  item.agent = agent.name;
  item.x = x;
  item.y = y;
  item.z = z;
  item.flags = flags;
  item.id = item_key(item.kind, domain.name, agent.name, x, y, z, flags.label());
  item.s1_text = agent.name + " will " + fill_slot(domain.verb_phrase, body) + ".";
  item.s2_prefix = render_s2_prefix(domain, agent, x, y, z, templates);
  item.answer = x;
  check_counts(item, 2);
  return item;
}

StimulusItem build_control(const EntityDomain& domain, const AgentName& agent, const std::string& x,
                           const std::string& y, const std::string& z, const std::string& repeated,
                           const StimulusTemplates& templates) {
  check_entities(domain, x, y, z);
  if (repeated != x && repeated != y && repeated != z) {
    throw InvalidArgument("repeated entity '" + repeated + "' must be one of x, y, z");
  }
  StimulusItem item;
  item.kind = ItemKind::kControl;
  item.domain = domain.name;
  item.agent = agent.name;
  item.x = x;
  item.y = y;
  item.z = z;
  item.id = item_key(item.kind, domain.name, agent.name, x, y, z, "rep=" + repeated);
  item.s1_text = agent.name + " keeps thinking about " + fill_slot(domain.gerund_phrase, x + ", " + y + ", and " + z) +
                 ", but especially " + repeated + ".";
  item.s2_prefix = render_s2_prefix(domain, agent, x, y, z, templates);
  item.answer = x;
  for (const auto* e : {&x, &y, &z}) {
    if (count_word(item.s1_text, *e) != (*e == repeated ? 2u : 1u)) {
      throw InvalidArgument("item " + item.id + ": entity '" + *e + "' collides with template wording");
    }
  }
  return item;
}

StimulusItem build_patching_item(const EntityDomain& domain, const AgentName& agent, const std::string& x,
                                 const std::string& y, const std::string& z, const StimulusTemplates& templates) {
  StimulusItem item = build_critical(domain, agent, x, y, z, ConditionFlags{}, templates);
  item.kind = ItemKind::kPatching;
  item.id = item_key(item.kind, domain.name, agent.name, x, y, z, "YXZX");

  PatchingLayout layout;
  const std::string s2 =
      agent.subject() + " will " + fill_slot(domain.verb_phrase, y + " or " + x + " or " + z + " or " + x) + ".";
  layout.source_text = item.s1_text + " " + s2;
  const std::size_t s2_start = item.s1_text.size() + 1;
  const auto in_s2 = find_word_offsets(s2, x);
  if (in_s2.size() != 2) {
    throw InvariantViolation("item " + item.id + ": X occurs " + std::to_string(in_s2.size()) +
                             " times in the source S2, expected 2");
  }
  layout.x1_offset = s2_start + in_s2[0];
  layout.x2_offset = s2_start + in_s2[1];
  const std::string stem = " " + agent.subject() + " will " + fill_slot(domain.verb_phrase, "");
  layout.base_text = layout.source_text + stem + x;
  layout.target_offset = layout.base_text.size() - x.size();
  layout.continuation_a = " " + domain.suffix_a;
  layout.continuation_b = " " + domain.suffix_b;
  item.patching = std::move(layout);
  return item;
}

SampledDataset sample_dataset(std::uint64_t seed, std::size_t n_per_condition, const StimulusData& data,
                              const BpeTokenizer& tok, const SampleOptions& options) {
  SampledDataset out;
  std::vector<std::string> reserved_words = {"will", "or", "and", "but", "especially", "keeps", "thinking", "about"};
  for (const auto& n : data.names) {
    reserved_words.push_back(n.name);
    reserved_words.push_back(n.subject());
  }

  struct Usable {
    const EntityDomain* domain;
    std::vector<std::string> entities;
  };
  std::vector<Usable> usable;
  for (const auto& d : data.domains) {
    Usable u{&d, {}};
    const std::string template_text = d.verb_phrase + " " + d.gerund_phrase + " " + d.suffix_a + " " + d.suffix_b;
    for (const auto& e : d.entities) {
      if (!tok.is_single_token(" " + e)) continue;
      if (count_word(template_text, e) != 0) continue;
      if (std::find(reserved_words.begin(), reserved_words.end(), e) != reserved_words.end()) continue;
      u.entities.push_back(e);
    }
    if (u.entities.size() < 3) {
      out.warnings.push_back("domain '" + d.name + "' skipped: only " + std::to_string(u.entities.size()) +
                             " single-token entities");
      continue;
    }
    usable.push_back(std::move(u));
  }
  if (usable.empty()) throw EmptyResult("no domain has at least 3 single-token entities");

  std::size_t capacity = 0;
  for (const auto& u : usable) {
    const std::size_t k = u.entities.size();
    capacity += k * (k - 1) * (k - 2);
  }
  const std::size_t needed = n_per_condition + options.n_patching;
  if (needed > capacity) {
    throw InvalidArgument("requested " + std::to_string(needed) + " distinct (x, y, z) tuples but only " +
                          std::to_string(capacity) + " exist");
  }

  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  struct Tuple {
    const EntityDomain* domain;
    const AgentName* agent;
    std::string x, y, z;
  };
  std::set<std::tuple<std::string, std::string, std::string>> used;
  auto draw = [&]() {
    while (true) {
      const auto& u = usable[pick(usable.size())];
      const auto& agent = data.names[pick(data.names.size())];
      const std::size_t k = u.entities.size();
      const std::size_t ix = pick(k);
      std::size_t iy = pick(k - 1);
      if (iy >= ix) ++iy;
      std::size_t iz;
      do {
        iz = pick(k);
      } while (iz == ix || iz == iy);
      auto key = std::make_tuple(u.entities[ix], u.entities[iy], u.entities[iz]);
      if (!used.insert(key).second) continue;
      return Tuple{u.domain, &agent, u.entities[ix], u.entities[iy], u.entities[iz]};
    }
  };

  std::vector<Tuple> tuples;
  tuples.reserve(n_per_condition);
  for (std::size_t i = 0; i < n_per_condition; ++i) tuples.push_back(draw());

  auto index_str = [](std::size_t i) {
    std::string s = std::to_string(i);
    return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
  };
  auto maybe_bridge = [&](StimulusItem& item) {
    if (options.with_bridge) item.bridge = replace_all(data.templates.bridge, "{agent}", item.agent);
  };

  for (const auto& flags : ConditionFlags::all()) {
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      const auto& t = tuples[i];
      StimulusItem item = build_critical(*t.domain, *t.agent, t.x, t.y, t.z, flags, data.templates);
      item.id = index_str(i) + "-" + flags.label();
      maybe_bridge(item);
      out.items.push_back(std::move(item));
    }
  }
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    const auto& t = tuples[i];
    StimulusItem item = build_control(*t.domain, *t.agent, t.x, t.y, t.z, t.x, data.templates);
    item.id = index_str(i) + "-control";
    maybe_bridge(item);
    out.items.push_back(std::move(item));
  }
  for (std::size_t i = 0; i < options.n_patching; ++i) {
    const Tuple t = draw();
    StimulusItem item = build_patching_item(*t.domain, *t.agent, t.x, t.y, t.z, data.templates);
    item.id = index_str(i) + "-patch";
    out.items.push_back(std::move(item));
  }
  return out;
}

std::optional<std::size_t> token_index_at_offset(const BpeTokenizer& tok, std::span<const TokenId> ids,
                                                 std::size_t offset) {
  std::size_t start = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t end = start + tok.token_bytes(ids[i]).size();
    if (offset >= start && offset < end) return i;
    start = end;
  }
  return std::nullopt;
}

std::string to_json_line(const StimulusItem& item) {
  json j = json::object();
  j["id"] = item.id;
  j["kind"] = std::string(to_string(item.kind));
  j["domain"] = item.domain;
  j["agent"] = item.agent;
  j["x"] = item.x;
  j["y"] = item.y;
  j["z"] = item.z;
  j["flags"] = flags_json(item.flags);
  j["s1_text"] = item.s1_text;
  j["s2_prefix"] = item.s2_prefix;
  j["answer"] = item.answer;
  j["bridge"] = item.bridge ? json(*item.bridge) : json(nullptr);
  if (item.patching) {
    const auto& p = *item.patching;
    j["patching"] = {{"source_text", p.source_text},       {"base_text", p.base_text},
                     {"x1_offset", p.x1_offset},           {"x2_offset", p.x2_offset},
                     {"target_offset", p.target_offset},   {"continuation_a", p.continuation_a},
                     {"continuation_b", p.continuation_b}};
  }
  return j.dump();
}

StimulusItem from_json_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    StimulusItem item;
    item.id = j.at("id").get<std::string>();
    const auto kind = item_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw LoadError("item " + item.id + ": unknown kind");
    item.kind = *kind;
    item.domain = j.at("domain").get<std::string>();
    item.agent = j.at("agent").get<std::string>();
    item.x = j.at("x").get<std::string>();
    item.y = j.at("y").get<std::string>();
    item.z = j.at("z").get<std::string>();
    const auto& f = j.at("flags");
    item.flags = ConditionFlags{f.at("first_match").get<bool>(), f.at("second_match").get<bool>(),
                                f.at("halves_match").get<bool>()};
    item.s1_text = j.at("s1_text").get<std::string>();
    item.s2_prefix = j.at("s2_prefix").get<std::string>();
    item.answer = j.at("answer").get<std::string>();
    if (j.contains("bridge") && j.at("bridge").is_string()) item.bridge = j.at("bridge").get<std::string>();
    if (j.contains("patching")) {
      const auto& p = j.at("patching");
      PatchingLayout layout;
      layout.source_text = p.at("source_text").get<std::string>();
      layout.base_text = p.at("base_text").get<std::string>();
      layout.x1_offset = p.at("x1_offset").get<std::size_t>();
      layout.x2_offset = p.at("x2_offset").get<std::size_t>();
      layout.target_offset = p.at("target_offset").get<std::size_t>();
      layout.continuation_a = p.at("continuation_a").get<std::string>();
      layout.continuation_b = p.at("continuation_b").get<std::string>();
      item.patching = std::move(layout);
    }
    return item;
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed stimulus line: ") + e.what());
  }
}

void write_jsonl(const std::filesystem::path& path, std::span<const StimulusItem> items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  for (const auto& item : items) out << to_json_line(item) << '\n';
  if (!out) throw LoadError("failed writing " + path.string());
}

std::vector<StimulusItem> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<StimulusItem> items;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    items.push_back(from_json_line(line));
  }
  return items;
}

}  // namespace dlens
