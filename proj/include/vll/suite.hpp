#pragma once

// Labeled prompt suites generated from templates. Ground truth comes from the
// template inputs, never from a parser, so it can grade the interpreter.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vll/confidence.hpp"
#include "vll/domain_db.hpp"
#include "vll/goal_spec.hpp"
#include "vll/interpreter.hpp"
#include "vll/scripted_backend.hpp"

namespace vll {

struct LabeledPrompt {
  std::string prompt;
  GoalSpec truth;
  std::string template_id;
};

namespace suite_detail {

inline std::string spoken_name(const Location& l, bool use_alias) {
  if (!use_alias || l.aliases.empty()) return l.code;
  std::string a = l.aliases.front();
  bool cap = true;
  for (auto& c : a) {
    if (cap && std::isalpha(static_cast<unsigned char>(c))) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    cap = c == ' ';
  }
  return a;
}

}  // namespace suite_detail

// `n` prompts over the database's locations, mostly route requests with a
// share of information queries.
inline std::vector<LabeledPrompt> generate_suite(const LogisticsDatabase& db, std::size_t n, std::uint64_t seed) {
  const auto& locs = db.locations();
  if (locs.size() < 2) throw std::invalid_argument("suite needs at least two locations");
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t bound) { return std::uniform_int_distribution<std::size_t>(0, bound - 1)(rng); };
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };

  static const char* superlative[] = {"cheapest", "fastest", "safest"};
  static const char* adverb[] = {"cheaply", "quickly", "safely"};

  std::vector<LabeledPrompt> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledPrompt lp;
    GoalSpec& g = lp.truth;
    auto model = [&](SlotName s, SlotValue v) { g.set(Slot{s, std::move(v), std::nullopt, Provenance::model}); };

    if (coin(0.15)) {
      std::size_t a = pick(locs.size()), b = pick(locs.size());
      g.intent = Intent::InfoQuery;
      if (a == b || coin(0.4)) {
        lp.template_id = "info-one";
        lp.prompt = "Tell me about " + suite_detail::spoken_name(locs[a], coin(0.5));
        model(SlotName::subjects, LocationList{{locs[a].code}});
      } else {
        lp.template_id = "info-two";
        lp.prompt = "Info about " + suite_detail::spoken_name(locs[a], coin(0.5)) + " and " +
                    suite_detail::spoken_name(locs[b], coin(0.5));
        model(SlotName::subjects, LocationList{{locs[a].code, locs[b].code}});
      }
      g.raw_prompt = lp.prompt;
      out.push_back(std::move(lp));
      continue;
    }

    std::size_t o = pick(locs.size());
    std::size_t d = pick(locs.size() - 1);
    if (d >= o) ++d;
    std::size_t obj = pick(3);
    std::string from = suite_detail::spoken_name(locs[o], coin(0.5));
    std::string to = suite_detail::spoken_name(locs[d], coin(0.5));
    g.intent = Intent::PlanRequest;
    model(SlotName::origin, LocationCode{locs[o].code});
    model(SlotName::destination, LocationCode{locs[d].code});
    model(SlotName::objective, kAllObjectives[obj]);

    std::size_t shape = pick(3);
    if (shape == 0) {
      lp.template_id = "plan-superlative";
      lp.prompt = std::string("Plan the ") + superlative[obj] + " route from " + from + " to " + to;
    } else if (shape == 1) {
      lp.template_id = "plan-adverb";
      lp.prompt = "Deliver the cargo from " + from + " to " + to + " as " + adverb[obj] + " as possible";
    } else {
      lp.template_id = "plan-ship";
      lp.prompt = std::string("Ship supplies ") + adverb[obj] + " from " + from + " to " + to;
    }
    if (coin(0.25)) {
      int hours = 4 + static_cast<int>(pick(20));
      lp.prompt += " within " + std::to_string(hours) + " hours";
      lp.template_id += "+deadline";
      model(SlotName::deadline, Minutes{hours * 60.0});
    }
    if (coin(0.2)) {
      int fuel = 500 + 100 * static_cast<int>(pick(30));
      lp.prompt += " with a fuel budget of " + std::to_string(fuel);
      lp.template_id += "+fuel";
      model(SlotName::max_fuel, Units{static_cast<double>(fuel)});
    }
    if (coin(0.15)) {
      int risk = 100 + 20 * static_cast<int>(pick(30));
      lp.prompt += " keeping risk under " + std::to_string(risk);
      lp.template_id += "+risk";
      model(SlotName::max_risk, Units{static_cast<double>(risk)});
    }
    double w = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (w < 0.15) {
      lp.prompt += ", considering the weather";
      lp.template_id += "+weather";
      model(SlotName::consider_weather, true);
    } else if (w < 0.25) {
      lp.prompt += " and ignore weather";
      lp.template_id += "+noweather";
      model(SlotName::consider_weather, false);
    } else {
      g.set(Slot{SlotName::consider_weather, false, std::nullopt, Provenance::defaulted});
    }
    g.raw_prompt = lp.prompt;
    out.push_back(std::move(lp));
  }
  return out;
}

// Per-slot exact match of `goal` against `truth` over the truth's essential slots.
inline std::map<SlotName, bool> slot_correctness(const GoalSpec& goal, const GoalSpec& truth,
                                                 const EssentialSlotPolicy& policy = EssentialSlotPolicy::standard()) {
  std::map<SlotName, bool> out;
  for (auto name : policy.essential_for(truth)) {
    const Slot* a = goal.find(name);
    const Slot* b = truth.find(name);
    out[name] = a && b && a->value == b->value && goal.intent == truth.intent;
  }
  return out;
}

// Calibration examples: one per model-filled essential slot, labeled by
// exact match against the template truth.
inline std::vector<LabeledExample> collect_examples(const std::vector<LabeledPrompt>& suite,
                                                    const LogisticsDatabase& db, const NoiseProfile& profile,
                                                    std::uint64_t seed) {
  std::vector<LabeledExample> out;
  auto policy = EssentialSlotPolicy::standard();
  for (const auto& lp : suite) {
    auto r = scripted_interpret(lp.prompt, db, profile, seed);
    for (auto name : policy.essential_for(r.goal)) {
      const Slot* s = r.goal.find(name);
      if (!s || s->provenance != Provenance::model || r.trace.attributed(name).empty()) continue;
      const Slot* t = lp.truth.find(name);
      out.push_back({field_features(r.trace, name), t && t->value == s->value});
    }
  }
  return out;
}

}  // namespace vll
