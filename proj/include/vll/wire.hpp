#pragma once

// JSON encodings shared by the service, transcripts and dataset exports.

#include <json.hpp>

#include "vll/confidence.hpp"
#include "vll/dialogue.hpp"
#include "vll/plan.hpp"
#include "vll/verifier.hpp"

namespace vll::wire {

using json = nlohmann::json;

struct WireError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline SlotName slot_from(const json& j) {
  auto s = parse_slot_name(j.get<std::string>());
  if (!s) throw WireError("unknown slot '" + j.get<std::string>() + "'");
  return *s;
}

inline json to_json(const ConfidenceReport& r) {
  json slots = json::array();
  for (const auto& s : r.slots)
    slots.push_back({{"slot", to_string(s.slot)}, {"raw", s.raw}, {"calibrated", s.calibrated}, {"present", s.present}});
  json clarify = json::array();
  for (auto s : r.clarify) clarify.push_back(to_string(s));
  return {{"slots", slots},         {"global", r.global},     {"threshold", r.threshold},
          {"decision", to_string(r.decision)}, {"clarify", clarify}, {"intent_unresolved", r.intent_unresolved}};
}

inline ConfidenceReport report_from_json(const json& j) {
  ConfidenceReport r;
  for (const auto& s : j.at("slots"))
    r.slots.push_back({slot_from(s.at("slot")), s.at("raw").get<double>(), s.at("calibrated").get<double>(),
                       s.at("present").get<bool>()});
  r.global = j.at("global").get<double>();
  r.threshold = j.at("threshold").get<double>();
  r.decision = j.at("decision").get<std::string>() == "Accept" ? Decision::Accept : Decision::Clarify;
  for (const auto& s : j.at("clarify")) r.clarify.push_back(slot_from(s));
  r.intent_unresolved = j.at("intent_unresolved").get<bool>();
  return r;
}

inline json to_json(const FieldFeatures& f) {
  return {{"mean_logprob", f.mean_logprob}, {"min_logprob", f.min_logprob}, {"mean_entropy", f.mean_entropy},
          {"max_entropy", f.max_entropy},   {"token_count", f.token_count}, {"degraded", f.degraded}};
}

inline FieldFeatures features_from_json(const json& j) {
  FieldFeatures f;
  f.mean_logprob = j.at("mean_logprob").get<double>();
  f.min_logprob = j.at("min_logprob").get<double>();
  f.mean_entropy = j.at("mean_entropy").get<double>();
  f.max_entropy = j.at("max_entropy").get<double>();
  f.token_count = j.at("token_count").get<double>();
  f.degraded = j.at("degraded").get<bool>();
  return f;
}

inline json to_json(const Plan& p) {
  json legs = json::array();
  for (const auto& l : p.legs)
    legs.push_back({{"origin", l.origin}, {"destination", l.destination}, {"depart", l.depart}, {"arrive", l.arrive}});
  return {{"legs", legs},
          {"totals", {{"fuel", p.totals.fuel}, {"risk", p.totals.risk}, {"minutes", p.totals.minutes}}},
          {"objective", to_string(p.objective)},
          {"objective_value", p.objective_value},
          {"db_version", p.db_version}};
}

inline Plan plan_from_json(const json& j) {
  Plan p;
  for (const auto& l : j.at("legs"))
    p.legs.push_back({l.at("origin").get<std::string>(), l.at("destination").get<std::string>(),
                      l.at("depart").get<double>(), l.at("arrive").get<double>()});
  const auto& t = j.at("totals");
  p.totals = {t.at("fuel").get<double>(), t.at("risk").get<double>(), t.at("minutes").get<double>()};
  auto o = parse_objective(j.at("objective").get<std::string>());
  if (!o) throw WireError("unknown objective");
  p.objective = *o;
  p.objective_value = j.at("objective_value").get<double>();
  p.db_version = j.at("db_version").get<std::string>();
  return p;
}

inline json to_json(const ComplianceReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"kind", to_string(c.kind)},
                      {"bound", c.bound},
                      {"observed", c.observed},
                      {"pass", c.pass},
                      {"notes", c.notes}});
  json disc = json::array();
  for (const auto& d : r.discrepancies)
    disc.push_back({{"field", d.field}, {"stated", d.stated}, {"recomputed", d.recomputed}});
  return {{"checks", checks}, {"discrepancies", disc}, {"overall", r.overall}};
}

inline json to_json(const ClarificationQuestion& q) {
  return {{"slot", q.slot ? json(to_string(*q.slot)) : json("intent")},
          {"text", q.text},
          {"schema", to_string(q.schema)},
          {"options", q.options}};
}

inline json to_json(const Turn& t) {
  return {{"role", t.role == Turn::Role::user ? "user" : "system"},
          {"event", t.event},
          {"text", t.text},
          {"timestamp_ms", t.timestamp_ms}};
}

// Full client-facing view of a session.
inline json session_view(const DialogueSession& s) {
  json turns = json::array();
  for (const auto& t : s.turns) turns.push_back(to_json(t));
  json pending = json::array();
  for (const auto& q : s.pending) pending.push_back(to_json(q));
  json out = {{"v", 1},
              {"id", s.id},
              {"state", to_string(s.state)},
              {"round_count", s.round_count},
              {"max_rounds", s.max_rounds},
              {"turns", turns},
              {"pending", pending},
              {"goal", s.state == SessionState::AwaitingPrompt ? json(nullptr) : goal_to_json(s.goal)},
              {"report", s.report ? to_json(*s.report) : json(nullptr)},
              {"failure", s.failure_reason.empty() ? json(nullptr) : json(s.failure_reason)}};
  json plan = nullptr, compliance = nullptr, facts = nullptr;
  if (s.outcome) {
    if (s.outcome->plan) plan = to_json(*s.outcome->plan);
    if (s.outcome->compliance) compliance = to_json(*s.outcome->compliance);
    if (!s.outcome->facts_pddl.empty()) facts = s.outcome->facts_pddl;
  }
  out["plan"] = plan;
  out["compliance"] = compliance;
  out["facts"] = facts;
  return out;
}

}  // namespace vll::wire
