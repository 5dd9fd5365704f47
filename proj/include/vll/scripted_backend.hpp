#pragma once

// Deterministic offline interpreter. A keyword/alias parser produces the
// noise-free goal; a seeded noise model then corrupts slots and shapes each
// token's alternative distribution so that trace flatness tracks correctness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vll/hash.hpp"
#include "vll/interpreter.hpp"

namespace vll {

namespace scripted {

struct Mention {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string code;
  std::string preceding;  // lowercase word right before the mention
};

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '\''; }

inline std::string word_before(std::string_view lower_text, std::size_t pos) {
  std::size_t i = pos;
  while (i > 0 && !is_word_char(lower_text[i - 1])) --i;
  std::size_t end = i;
  while (i > 0 && is_word_char(lower_text[i - 1])) --i;
  return std::string(lower_text.substr(i, end - i));
}

// Location mentions in textual order: aliases (case-insensitive, longest
// first) and upper-case codes known to the database.
inline std::vector<Mention> find_mentions(std::string_view x, const LogisticsDatabase& db) {
  std::string low = text::lower(x);
  std::vector<Mention> picked;
  auto overlaps = [&](std::size_t b, std::size_t e) {
    for (const auto& m : picked)
      if (b < m.end && m.begin < e) return true;
    return false;
  };
  auto bounded = [&](std::size_t b, std::size_t e) {
    return (b == 0 || !is_word_char(low[b - 1])) && (e >= low.size() || !is_word_char(low[e]));
  };

  std::vector<std::pair<std::string, std::string>> aliases;  // (lower alias, code)
  for (const auto& l : db.locations())
    for (const auto& a : l.aliases) aliases.emplace_back(text::lower(a), l.code);
  std::sort(aliases.begin(), aliases.end(), [](const auto& a, const auto& b) {
    return a.first.size() != b.first.size() ? a.first.size() > b.first.size() : a < b;
  });
  for (const auto& [alias, code] : aliases) {
    if (alias.empty()) continue;
    for (std::size_t pos = low.find(alias); pos != std::string::npos; pos = low.find(alias, pos + 1)) {
      std::size_t end = pos + alias.size();
      if (bounded(pos, end) && !overlaps(pos, end)) picked.push_back({pos, end, code, word_before(low, pos)});
    }
  }
  for (std::size_t i = 0; i < x.size();) {
    if (!is_word_char(x[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < x.size() && is_word_char(x[j])) ++j;
    std::string_view word = x.substr(i, j - i);
    if (is_location_code(word) && db.find_location(word) && !overlaps(i, j))
      picked.push_back({i, j, std::string(word), word_before(low, i)});
    i = j;
  }
  std::sort(picked.begin(), picked.end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
  std::vector<Mention> out;
  std::set<std::string> seen;
  for (auto& m : picked)
    if (seen.insert(m.code).second) out.push_back(std::move(m));
  return out;
}

inline std::set<std::string> words_of(std::string_view lower_text) {
  std::set<std::string> out;
  for (std::size_t i = 0; i < lower_text.size();) {
    if (!is_word_char(lower_text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < lower_text.size() && is_word_char(lower_text[j])) ++j;
    out.emplace(lower_text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool any_word(const std::set<std::string>& words, std::initializer_list<const char*> keys) {
  for (auto k : keys)
    if (words.count(k)) return true;
  return false;
}

// Noise-free keyword parse. Slots come back without confidences.
inline GoalSpec keyword_parse(std::string_view x, const LogisticsDatabase& db,
                              std::optional<Intent> hint = std::nullopt) {
  GoalSpec g;
  g.raw_prompt = std::string(x);
  std::string low = text::lower(x);
  auto mentions = find_mentions(x, db);

  // Budget phrases are cut out before objective detection so "fuel budget 800"
  // does not read as "minimize fuel".
  static const std::regex fuel_re(
      R"(\b(?:fuel|cost)\s+(?:(?:budget|limit|cap)\s+(?:of\s+)?|(?:under|below|at most|no more than)\s+)(\d+(?:\.\d+)?))");
  static const std::regex risk_re(
      R"(\brisk\s+(?:(?:budget|limit|cap)\s+(?:of\s+)?|(?:under|below|at most|no more than)\s+)(\d+(?:\.\d+)?))");
  static const std::regex deadline_re(
      R"(\b(?:within|before|by|in)\s+(\d+(?:\.\d+)?)\s*(minutes|minute|mins|min|hours|hour|hrs|hr|h)\b)");

  std::string stripped = low;
  auto take = [&](const std::regex& re) -> std::optional<std::pair<double, std::string>> {
    std::smatch m;
    if (!std::regex_search(stripped, m, re)) return std::nullopt;
    auto v = text::parse_number(m[1].str());
    std::string unit = m.size() > 2 ? m[2].str() : std::string{};
    std::fill(stripped.begin() + m.position(0), stripped.begin() + m.position(0) + m.length(0), ' ');
    if (!v) return std::nullopt;
    return std::pair{*v, unit};
  };
  auto max_fuel = take(fuel_re);
  auto max_risk = take(risk_re);
  auto deadline = take(deadline_re);
  auto words = words_of(stripped);

  bool plan_words = any_word(words, {"deliver", "delivery", "fly", "ship", "send", "route", "move", "transport",
                                     "plan", "haul", "airlift", "cargo", "supplies", "dispatch"});
  bool info_words = any_word(words, {"info", "information", "about", "facts", "tell", "show", "what", "describe",
                                     "details", "status", "list"});
  if (hint) g.intent = *hint;
  else if (plan_words && !mentions.empty()) g.intent = Intent::PlanRequest;
  else if (info_words && !mentions.empty()) g.intent = Intent::InfoQuery;
  else if (mentions.size() >= 2 && any_word(words, {"from"}) && any_word(words, {"to"})) g.intent = Intent::PlanRequest;
  else g.intent = Intent::Unknown;

  auto model_slot = [&](SlotName n, SlotValue v) { g.set(Slot{n, std::move(v), std::nullopt, Provenance::model}); };

  if (g.intent == Intent::InfoQuery || (g.intent == Intent::Unknown && !mentions.empty())) {
    if (!mentions.empty()) {
      LocationList l;
      for (const auto& m : mentions) l.codes.push_back(m.code);
      model_slot(SlotName::subjects, l);
    }
    return g;
  }
  if (g.intent != Intent::PlanRequest) return g;

  const Mention* origin = nullptr;
  const Mention* destination = nullptr;
  for (const auto& m : mentions) {
    if (!origin && (m.preceding == "from" || m.preceding == "leaving" || m.preceding == "departing")) origin = &m;
    else if (!destination && (m.preceding == "to" || m.preceding == "into" || m.preceding == "towards" ||
                              m.preceding == "reach"))
      destination = &m;
  }
  std::vector<const Mention*> rest;
  for (const auto& m : mentions)
    if (&m != origin && &m != destination) rest.push_back(&m);
  std::size_t r = 0;
  if (!origin && !destination && rest.size() == 1) destination = rest[r++];
  if (!origin && r < rest.size()) origin = rest[r++];
  if (!destination && r < rest.size()) destination = rest[r++];
  if (origin) model_slot(SlotName::origin, LocationCode{origin->code});
  if (destination) model_slot(SlotName::destination, LocationCode{destination->code});

  struct Cue {
    Objective objective;
    std::vector<const char*> words;
  };
  static const std::vector<Cue> cues = {
      {Objective::min_fuel_cost, {"cheap", "cheapest", "cheaply", "economical", "inexpensive", "cost", "costs"}},
      {Objective::min_time, {"fast", "fastest", "quick", "quickest", "quickly", "asap", "urgent", "urgently",
                             "soonest", "earliest"}},
      {Objective::min_risk, {"safe", "safest", "safely", "risky", "secure", "securely"}},
  };
  std::optional<std::pair<std::size_t, Objective>> first_cue;
  for (const auto& cue : cues)
    for (auto w : cue.words) {
      std::string key(w);
      for (std::size_t pos = stripped.find(key); pos != std::string::npos; pos = stripped.find(key, pos + 1)) {
        bool bounded = (pos == 0 || !is_word_char(stripped[pos - 1])) &&
                       (pos + key.size() >= stripped.size() || !is_word_char(stripped[pos + key.size()]));
        if (bounded && (!first_cue || pos < first_cue->first)) first_cue = std::pair{pos, cue.objective};
      }
    }
  if (first_cue) model_slot(SlotName::objective, first_cue->second);

  if (deadline) {
    double minutes = deadline->first;
    if (deadline->second.rfind("h", 0) == 0) minutes *= 60.0;
    model_slot(SlotName::deadline, Minutes{minutes});
  }
  if (max_fuel) model_slot(SlotName::max_fuel, Units{max_fuel->first});
  if (max_risk) model_slot(SlotName::max_risk, Units{max_risk->first});

  bool weather_off = low.find("ignore weather") != std::string::npos ||
                     low.find("ignore the weather") != std::string::npos ||
                     low.find("regardless of weather") != std::string::npos ||
                     low.find("without weather") != std::string::npos;
  if (weather_off) model_slot(SlotName::consider_weather, false);
  else if (any_word(words, {"weather", "storm", "storms", "wind", "snow", "fog"}))
    model_slot(SlotName::consider_weather, true);
  else g.set(Slot{SlotName::consider_weather, false, std::nullopt, Provenance::defaulted});
  return g;
}

inline std::string surface(const SlotValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, LocationCode>) return x.code;
        else if constexpr (std::is_same_v<T, Objective>) return std::string(to_string(x));
        else if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        else if constexpr (std::is_same_v<T, Minutes> || std::is_same_v<T, Units>) return text::format_number(x.value);
        else return text::join(x.codes, ",");
      },
      v);
}

// Candidate values a single token could take, truth excluded; deterministic order.
inline std::vector<std::string> distractors(SlotName name, const std::string& truth, const LogisticsDatabase& db) {
  std::vector<std::string> out;
  switch (expected_kind(name)) {
    case ValueKind::location_list:
    case ValueKind::location:
      for (const auto& l : db.locations())
        if (l.code != truth) out.push_back(l.code);
      break;
    case ValueKind::objective:
      for (auto o : kAllObjectives)
        if (to_string(o) != truth) out.emplace_back(to_string(o));
      break;
    case ValueKind::boolean:
      out.push_back(truth == "true" ? "false" : "true");
      break;
    case ValueKind::minutes:
    case ValueKind::units: {
      double v = text::parse_number(truth).value_or(0.0);
      for (double c : {v * 2.0, v + 60.0, v / 2.0, v + 100.0}) {
        std::string s = text::format_number(c);
        if (s != truth && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
      }
      break;
    }
  }
  return out;
}

inline SlotValue value_from_surface(SlotName name, const std::string& s) {
  switch (expected_kind(name)) {
    case ValueKind::location: return LocationCode{s};
    case ValueKind::objective: return *parse_objective(s);
    case ValueKind::boolean: return s == "true";
    case ValueKind::minutes: return Minutes{text::parse_number(s).value_or(0.0)};
    case ValueKind::units: return Units{text::parse_number(s).value_or(0.0)};
    case ValueKind::location_list: return LocationList{{s}};
  }
  return LocationCode{s};
}

inline void sort_alternatives(std::vector<Alternative>& alts) {
  std::stable_sort(alts.begin(), alts.end(), [](const Alternative& a, const Alternative& b) {
    return a.logprob != b.logprob ? a.logprob > b.logprob : a.text < b.text;
  });
}

// Uniform over the chosen value and up to k-1 others.
inline TraceToken flat_token(const std::string& chosen, std::vector<std::string> others, int k) {
  std::vector<std::string> support{chosen};
  for (auto& o : others)
    if (static_cast<int>(support.size()) < k && std::find(support.begin(), support.end(), o) == support.end())
      support.push_back(o);
  double lp = std::log(1.0 / static_cast<double>(support.size()));
  TraceToken t{chosen, lp, {}, std::nullopt};
  for (const auto& s : support) t.alternatives.push_back({s, lp});
  sort_alternatives(t.alternatives);
  return t;
}

// Chosen value at probability p, the remaining mass spread 0.6/0.3/0.1 over others.
inline TraceToken peaked_token(const std::string& chosen, double p, std::vector<std::string> others, int k) {
  static constexpr double shares[] = {0.6, 0.3, 0.1};
  std::vector<std::string> support;
  for (auto& o : others)
    if (o != chosen && static_cast<int>(support.size()) < std::min(k - 1, 3) &&
        std::find(support.begin(), support.end(), o) == support.end())
      support.push_back(o);
  TraceToken t{chosen, std::log(p), {{chosen, std::log(p)}}, std::nullopt};
  if (support.empty()) {
    t.logprob = 0.0;
    t.alternatives.front().logprob = 0.0;
    return t;
  }
  double norm = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) norm += shares[i];
  for (std::size_t i = 0; i < support.size(); ++i)
    t.alternatives.push_back({support[i], std::log((1.0 - p) * shares[i] / norm)});
  sort_alternatives(t.alternatives);
  return t;
}

}  // namespace scripted

// Deterministic for fixed (x, profile, seed, hint).
inline InterpretResult scripted_interpret(std::string_view x, const LogisticsDatabase& db, const NoiseProfile& profile,
                                          std::uint64_t seed, const InterpretOptions& opts = {}) {
  using namespace scripted;
  InterpretResult result;
  result.backend_id = "scripted";
  GoalSpec truth = keyword_parse(x, db, opts.intent_hint);
  GoalSpec goal = truth;
  const std::uint64_t prompt_hash = sha256_u64(x);
  const int k = std::max(1, profile.flat_k);

  auto rng_for = [&](std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(prompt_hash), static_cast<std::uint32_t>(prompt_hash >> 32), stream};
    return std::mt19937_64(seq);
  };

  {
    auto rng = rng_for(100);
    std::uniform_real_distribution<double> top(profile.clean_top_min, profile.clean_top_max);
    std::vector<std::string> others;
    for (auto i : {Intent::InfoQuery, Intent::PlanRequest, Intent::Unknown})
      if (i != goal.intent) others.emplace_back(to_string(i));
    TraceToken t = goal.intent == Intent::Unknown ? flat_token("Unknown", others, k)
                                                  : peaked_token(std::string(to_string(goal.intent)), top(rng), others, k);
    result.trace.tokens.push_back(std::move(t));
  }

  for (auto& [name, slot] : goal.slots) {
    if (slot.provenance != Provenance::model) continue;
    auto rng = rng_for(static_cast<std::uint32_t>(name));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool corrupt = unit(rng) < profile.rate(name);
    const bool coupled = unit(rng) < profile.coupling;
    std::uniform_real_distribution<double> clean_top(profile.clean_top_min, profile.clean_top_max);
    std::uniform_real_distribution<double> miscoupled_top(profile.miscoupled_top_min, profile.miscoupled_top_max);

    std::vector<std::string> values;
    if (auto* list = std::get_if<LocationList>(&slot.value)) values = list->codes;
    else values.push_back(surface(slot.value));

    std::size_t victim = values.size();
    std::string truth_value;
    if (corrupt) {
      std::uniform_int_distribution<std::size_t> pick_index(0, values.size() - 1);
      victim = pick_index(rng);
      truth_value = values[victim];
      auto pool = distractors(name, truth_value, db);
      if (kind_of(slot.value) == ValueKind::location_list)
        std::erase_if(pool, [&](const std::string& c) {
          return std::find(values.begin(), values.end(), c) != values.end();
        });
      if (pool.empty()) {
        victim = values.size();
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        values[victim] = pool[pick(rng)];
      }
    }

    for (std::size_t i = 0; i < values.size(); ++i) {
      const bool wrong = i == victim;
      std::string right = wrong ? truth_value : values[i];
      auto pool = distractors(name, right, db);
      std::shuffle(pool.begin(), pool.end(), rng);
      std::vector<std::string> others;
      if (wrong) others.push_back(right);
      for (auto& p : pool)
        if (p != values[i]) others.push_back(p);
      bool flat = wrong == coupled;  // flat when (wrong and coupled) or (right and miscoupled)
      TraceToken t;
      if (flat) t = flat_token(values[i], others, k);
      else t = peaked_token(values[i], wrong ? miscoupled_top(rng) : clean_top(rng), others, k);
      t.slot = name;
      result.trace.tokens.push_back(std::move(t));
    }

    if (victim < values.size()) {
      if (auto* list = std::get_if<LocationList>(&slot.value)) list->codes = values;
      else slot.value = value_from_surface(name, values.front());
    }
  }

  result.goal = std::move(goal);
  result.latency_ms =
      profile.base_latency_ms + profile.per_token_latency_ms * static_cast<double>(result.trace.tokens.size());
  if (result.goal.intent == Intent::Unknown) result.diagnostics.push_back("no recognizable request");
  return result;
}

class ScriptedBackend : public InterpreterBackend {
 public:
  ScriptedBackend(NoiseProfile profile, std::uint64_t seed) : profile_(std::move(profile)), seed_(seed) {}

  std::string id() const override { return "scripted"; }

  InterpretResult run(std::string_view prompt, const LogisticsDatabase& db, const InterpretOptions& opts) override {
    return scripted_interpret(prompt, db, profile_, seed_, opts);
  }

  const NoiseProfile& profile() const { return profile_; }
  std::uint64_t seed() const { return seed_; }

 private:
  NoiseProfile profile_;
  std::uint64_t seed_;
};

}  // namespace vll
