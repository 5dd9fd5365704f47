#pragma once

// Clarification-loop state machine:
//
//   AwaitingPrompt --UserPrompt--> Interpreting --InternalResult(interpret)-->
//     Accept  -> Planning --InternalResult(plan)--> Delivered | Failed
//     Clarify -> AwaitingClarification --UserAnswer--> (re-decide) ...
//
// `advance` is pure given its inputs; `DialogueDriver` performs the effects
// (backend calls, planning, verification) between transitions.

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "vll/confidence.hpp"
#include "vll/domain_db.hpp"
#include "vll/goal_spec.hpp"
#include "vll/interpreter.hpp"
#include "vll/pddl.hpp"
#include "vll/planner.hpp"
#include "vll/scripted_backend.hpp"
#include "vll/verifier.hpp"

namespace vll {

enum class SessionState { AwaitingPrompt, Interpreting, AwaitingClarification, Planning, Delivered, Failed };

inline std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::AwaitingPrompt: return "AwaitingPrompt";
    case SessionState::Interpreting: return "Interpreting";
    case SessionState::AwaitingClarification: return "AwaitingClarification";
    case SessionState::Planning: return "Planning";
    case SessionState::Delivered: return "Delivered";
    case SessionState::Failed: return "Failed";
  }
  return "AwaitingPrompt";
}

enum class AnswerSchema { options, location, location_list, minutes, boolean, units };

inline std::string_view to_string(AnswerSchema s) {
  switch (s) {
    case AnswerSchema::options: return "options";
    case AnswerSchema::location: return "location";
    case AnswerSchema::location_list: return "location_list";
    case AnswerSchema::minutes: return "minutes";
    case AnswerSchema::boolean: return "boolean";
    case AnswerSchema::units: return "units";
  }
  return "options";
}

// `slot` is empty for the intent question ("information or a route?").
struct ClarificationQuestion {
  std::optional<SlotName> slot;
  std::string text;
  AnswerSchema schema = AnswerSchema::options;
  std::vector<std::string> options;
  bool operator==(const ClarificationQuestion&) const = default;
};

struct Turn {
  enum class Role { user, system };
  Role role = Role::user;
  std::string event;  // UserPrompt, UserAnswer, Clarify, Reask, Deliver, Fail
  std::string text;
  std::int64_t timestamp_ms = 0;
  bool operator==(const Turn&) const = default;
};

struct PlanOutcome {
  std::optional<Plan> plan;
  std::optional<ComplianceReport> compliance;
  std::string facts_pddl;  // InfoQuery deliveries
  std::string problem_pddl;
  bool cache_hit = false;
  std::string failure;  // empty on success
};

struct DialogueSession {
  std::string id;
  SessionState state = SessionState::AwaitingPrompt;
  std::vector<Turn> turns;
  std::string prompt;
  GoalSpec goal;
  TokenTrace trace;
  std::optional<ConfidenceReport> report;
  std::optional<ConfidenceReport> initial_report;
  GoalSpec initial_goal;
  std::vector<ClarificationQuestion> pending;
  std::set<SlotName> clarified;
  std::optional<Intent> intent_hint;
  bool reinterpreted = false;
  int round_count = 0;
  int max_rounds = 3;
  std::string failure_reason;
  std::optional<PlanOutcome> outcome;
  double interpret_latency_ms = 0.0;
};

// ---------------------------------------------------------------------------
// Events

struct UserPrompt {
  std::string text;
};

struct Answer {
  std::optional<SlotName> slot;  // empty answers the intent question
  std::string value;
};

struct UserAnswer {
  std::vector<Answer> answers;
};

struct InterpretDone {
  InterpretResult result;
};

struct PlanDone {
  PlanOutcome outcome;
};

using Event = std::variant<UserPrompt, UserAnswer, InterpretDone, PlanDone>;

inline std::string_view event_name(const Event& e) {
  switch (e.index()) {
    case 0: return "UserPrompt";
    case 1: return "UserAnswer";
    default: return "InternalResult";
  }
}

struct ProtocolError : std::logic_error {
  ProtocolError(SessionState state, std::string_view event)
      : std::logic_error("event " + std::string(event) + " is not legal in state " + std::string(to_string(state))),
        state(state),
        event(event) {}
  SessionState state;
  std::string event;
};

struct DialogueContext {
  const LogisticsDatabase* db = nullptr;
  const CalibrationHead* head = nullptr;
  const ThresholdPolicy* policy = nullptr;
  DecideOptions decide;
  std::function<std::int64_t()> clock = [] { return std::int64_t{0}; };
};

// ---------------------------------------------------------------------------
// Questions and answers

inline std::vector<std::string> alternative_codes(const TokenTrace& trace, SlotName slot, std::size_t limit) {
  std::vector<Alternative> alts;
  for (const auto* t : trace.attributed(slot))
    for (const auto& a : t->alternatives)
      if (is_location_code(a.text)) alts.push_back(a);
  std::stable_sort(alts.begin(), alts.end(), [](const Alternative& a, const Alternative& b) {
    return a.logprob != b.logprob ? a.logprob > b.logprob : a.text < b.text;
  });
  std::vector<std::string> out;
  for (const auto& a : alts) {
    if (out.size() >= limit) break;
    if (std::find(out.begin(), out.end(), a.text) == out.end()) out.push_back(a.text);
  }
  return out;
}

inline ClarificationQuestion intent_question() {
  return {std::nullopt, "Did you want me to extract information from the database or plan a route?",
          AnswerSchema::options, {"info", "plan"}};
}

inline ClarificationQuestion generate_question(SlotName slot, const GoalSpec& /*goal*/, const TokenTrace& trace) {
  ClarificationQuestion q;
  q.slot = slot;
  auto with_options = [&](std::string base) {
    q.options = alternative_codes(trace, slot, 3);
    if (!q.options.empty()) base += " Options: " + text::join(q.options, ", ") + ".";
    return base;
  };
  switch (slot) {
    case SlotName::subjects:
      q.schema = AnswerSchema::location_list;
      q.text = with_options("Which locations did you mean?");
      break;
    case SlotName::origin:
      q.schema = AnswerSchema::location;
      q.text = with_options("Which origin did you mean?");
      break;
    case SlotName::destination:
      q.schema = AnswerSchema::location;
      q.text = with_options("Which destination did you mean?");
      break;
    case SlotName::objective:
      q.schema = AnswerSchema::options;
      q.text = "Do you mean to minimize cost, time, or risk?";
      for (auto o : kAllObjectives) q.options.emplace_back(to_string(o));
      break;
    case SlotName::deadline:
      q.schema = AnswerSchema::minutes;
      q.text = "What is the delivery deadline in minutes?";
      break;
    case SlotName::consider_weather:
      q.schema = AnswerSchema::boolean;
      q.text = "Should weather conditions be considered?";
      q.options = {"yes", "no"};
      break;
    case SlotName::max_fuel:
      q.schema = AnswerSchema::units;
      q.text = "What is the maximum fuel budget?";
      break;
    case SlotName::max_risk:
      q.schema = AnswerSchema::units;
      q.text = "What is the maximum acceptable route risk?";
      break;
  }
  return q;
}

// A parsed answer, or the reason it does not fit the question's schema.
struct ParsedAnswer {
  std::optional<SlotValue> value;
  std::optional<Intent> intent;
  std::string problem;
};

inline std::optional<std::string> resolve_location(std::string_view answer, const LogisticsDatabase& db) {
  std::string up = text::upper(text::trim(answer));
  if (db.find_location(up)) return up;
  auto mentions = scripted::find_mentions(answer, db);
  if (mentions.size() == 1) return mentions.front().code;
  return std::nullopt;
}

inline ParsedAnswer parse_answer(const ClarificationQuestion& q, std::string_view raw, const LogisticsDatabase& db) {
  ParsedAnswer out;
  std::string low = text::lower(text::trim(raw));
  if (low.empty()) {
    out.problem = "empty answer";
    return out;
  }
  if (!q.slot) {
    if (low == "info" || low == "information" || low == "infoquery" || low.find("extract") != std::string::npos ||
        low.find("information") != std::string::npos)
      out.intent = Intent::InfoQuery;
    else if (low == "plan" || low == "planrequest" || low.find("route") != std::string::npos ||
             low.find("plan") != std::string::npos)
      out.intent = Intent::PlanRequest;
    else out.problem = "expected 'info' or 'plan'";
    return out;
  }
  switch (q.schema) {
    case AnswerSchema::location: {
      if (auto code = resolve_location(raw, db)) out.value = LocationCode{*code};
      else {
        std::string up = text::upper(text::trim(raw));
        auto near = db.nearest_codes(up);
        if (near.empty()) near = q.options;  // nothing close: fall back to the offered alternatives
        out.problem = "unknown location '" + up + "'";
        if (!near.empty()) out.problem += "; did you mean " + text::join(near, ", ") + "?";
      }
      break;
    }
    case AnswerSchema::location_list: {
      LocationList list;
      std::string cleaned = std::string(raw);
      for (auto& c : cleaned)
        if (c == ',' || c == ';') c = ' ';
      for (const auto& part : text::split(cleaned, ' ')) {
        auto t = text::trim(part);
        if (t.empty() || text::lower(t) == "and") continue;
        std::string up = text::upper(t);
        if (db.find_location(up)) {
          if (std::find(list.codes.begin(), list.codes.end(), up) == list.codes.end()) list.codes.push_back(up);
        }
      }
      if (list.codes.empty())
        for (const auto& m : scripted::find_mentions(raw, db)) list.codes.push_back(m.code);
      if (list.codes.empty()) out.problem = "no known location codes in answer";
      else out.value = list;
      break;
    }
    case AnswerSchema::options: {
      std::optional<Objective> o = parse_objective(low);
      if (!o) {
        if (low.find("cost") != std::string::npos || low.find("fuel") != std::string::npos ||
            low.find("cheap") != std::string::npos)
          o = Objective::min_fuel_cost;
        else if (low.find("time") != std::string::npos || low.find("fast") != std::string::npos)
          o = Objective::min_time;
        else if (low.find("risk") != std::string::npos || low.find("safe") != std::string::npos)
          o = Objective::min_risk;
      }
      if (o) out.value = *o;
      else out.problem = "expected one of " + text::join(q.options, ", ");
      break;
    }
    case AnswerSchema::boolean:
      if (low == "yes" || low == "y" || low == "true" || low == "1" || low == "consider") out.value = true;
      else if (low == "no" || low == "n" || low == "false" || low == "0" || low == "ignore") out.value = false;
      else out.problem = "expected yes or no";
      break;
    case AnswerSchema::minutes:
    case AnswerSchema::units: {
      std::string num = low;
      double scale = 1.0;
      for (const char* suffix : {"minutes", "minute", "mins", "min", "hours", "hour", "hrs", "h"}) {
        std::string s(suffix);
        if (num.size() > s.size() && num.compare(num.size() - s.size(), s.size(), s) == 0) {
          if (q.schema == AnswerSchema::minutes && s[0] == 'h') scale = 60.0;
          num = std::string(text::trim(num.substr(0, num.size() - s.size())));
          break;
        }
      }
      auto v = text::parse_number(num);
      if (!v || *v < 0.0) out.problem = "expected a non-negative number";
      else if (q.schema == AnswerSchema::minutes) out.value = Minutes{*v * scale};
      else out.value = Units{*v};
      break;
    }
  }
  return out;
}

// Replaces one slot with a user-confirmed value; every other slot is untouched.
inline GoalSpec merge_answer(GoalSpec goal, SlotName slot, SlotValue value) {
  if (kind_of(value) != expected_kind(slot)) throw std::invalid_argument("answer does not match slot type");
  goal.set(Slot{slot, std::move(value), 1.0, Provenance::clarified});
  return goal;
}

// ---------------------------------------------------------------------------
// Transitions

namespace dialogue_detail {

inline void say(DialogueSession& s, const DialogueContext& ctx, std::string event, std::string text) {
  s.turns.push_back({Turn::Role::system, std::move(event), std::move(text), ctx.clock()});
}

inline std::string clarify_message(const std::vector<ClarificationQuestion>& qs) {
  std::string m = "I'm not sure about your request.";
  for (const auto& q : qs) m += " " + q.text;
  m += " Please confirm or clarify.";
  return m;
}

// Scores the current goal and moves to Planning or a new clarification round.
inline void redecide(DialogueSession& s, const DialogueContext& ctx) {
  ConfidenceReport report = decide(s.goal, s.trace, ctx.head, *ctx.policy, ctx.decide);
  attach_confidences(s.goal, s.trace, ctx.head, ctx.decide.default_prior);
  s.report = report;
  if (!s.initial_report) {
    s.initial_report = report;
    s.initial_goal = s.goal;
  }
  if (report.decision == Decision::Accept) {
    s.pending.clear();
    s.state = SessionState::Planning;
    return;
  }
  if (s.round_count + 1 > s.max_rounds) {
    s.pending.clear();
    s.state = SessionState::Failed;
    s.failure_reason = "unresolved ambiguity";
    say(s, ctx, "Fail",
        "I'm not sure about your request and could not resolve it within " + std::to_string(s.max_rounds) +
            " clarification round(s).");
    return;
  }
  ++s.round_count;
  s.pending.clear();
  if (report.intent_unresolved) {
    s.pending.push_back(intent_question());
  } else {
    for (auto slot : report.clarify) s.pending.push_back(generate_question(slot, s.goal, s.trace));
  }
  s.state = SessionState::AwaitingClarification;
  say(s, ctx, "Clarify", clarify_message(s.pending));
}

inline std::string plan_summary(const Plan& p) {
  std::string route = p.legs.empty() ? "(no movement)" : text::join(p.path(), " -> ");
  return "Plan: " + route + " (fuel " + text::format_number(p.totals.fuel) + ", risk " +
         text::format_number(p.totals.risk) + ", time " + text::format_number(p.totals.minutes) + " min).";
}

}  // namespace dialogue_detail

inline DialogueSession advance(DialogueSession s, const Event& event, const DialogueContext& ctx) {
  using namespace dialogue_detail;
  const SessionState from = s.state;
  auto illegal = [&]() -> ProtocolError { return ProtocolError(from, event_name(event)); };

  if (const auto* p = std::get_if<UserPrompt>(&event)) {
    if (from != SessionState::AwaitingPrompt && from != SessionState::Delivered && from != SessionState::Failed)
      throw illegal();
    DialogueSession next;
    next.id = s.id;
    next.turns = std::move(s.turns);
    next.max_rounds = s.max_rounds;
    next.prompt = p->text;
    next.state = SessionState::Interpreting;
    next.turns.push_back({Turn::Role::user, "UserPrompt", p->text, ctx.clock()});
    return next;
  }

  if (const auto* r = std::get_if<InterpretDone>(&event)) {
    if (from != SessionState::Interpreting) throw illegal();
    s.goal = r->result.goal;
    s.trace = r->result.trace;
    s.interpret_latency_ms += r->result.latency_ms;
    redecide(s, ctx);
    return s;
  }

  if (const auto* a = std::get_if<UserAnswer>(&event)) {
    if (from != SessionState::AwaitingClarification) throw illegal();
    std::string user_text;
    for (const auto& ans : a->answers) {
      if (!user_text.empty()) user_text += "; ";
      user_text += (ans.slot ? std::string(to_string(*ans.slot)) : std::string("intent")) + "=" + ans.value;
    }
    s.turns.push_back({Turn::Role::user, "UserAnswer", user_text, ctx.clock()});

    std::vector<std::string> reasks;
    bool reinterpret = false;
    for (const auto& ans : a->answers) {
      auto it = std::find_if(s.pending.begin(), s.pending.end(),
                             [&](const ClarificationQuestion& q) { return q.slot == ans.slot; });
      if (it == s.pending.end()) throw illegal();
      ParsedAnswer parsed = parse_answer(*it, ans.value, *ctx.db);
      if (!parsed.problem.empty()) {
        reasks.push_back("I could not use that answer (" + parsed.problem + "). " + it->text);
        continue;
      }
      if (!ans.slot) {
        s.intent_hint = parsed.intent;
        reinterpret = true;
      } else {
        s.goal = merge_answer(std::move(s.goal), *ans.slot, *parsed.value);
        s.clarified.insert(*ans.slot);
      }
      s.pending.erase(it);
    }
    if (!reasks.empty()) say(s, ctx, "Reask", text::join(reasks, " "));
    if (!s.pending.empty()) return s;
    if (reinterpret && !s.reinterpreted) {
      s.reinterpreted = true;
      s.state = SessionState::Interpreting;
      return s;
    }
    redecide(s, ctx);
    return s;
  }

  const auto& done = std::get<PlanDone>(event);
  if (from != SessionState::Planning) throw illegal();
  s.outcome = done.outcome;
  const PlanOutcome& o = done.outcome;
  bool ok = o.failure.empty() && (!o.plan || (o.compliance && o.compliance->overall));
  if (ok) {
    s.state = SessionState::Delivered;
    if (o.plan) say(s, ctx, "Deliver", plan_summary(*o.plan) + " " + verdict_to_feedback(*o.compliance));
    else say(s, ctx, "Deliver", o.facts_pddl.empty() ? std::string("No facts recorded.") : o.facts_pddl);
  } else {
    s.state = SessionState::Failed;
    s.failure_reason = o.failure.empty() ? std::string("verification failed") : o.failure;
    std::string msg = "Could not deliver a plan: " + s.failure_reason + ".";
    if (o.compliance) msg += "\n" + verdict_to_feedback(*o.compliance);
    say(s, ctx, "Fail", msg);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Driver

// Runs the effectful stages (interpretation, planning + verification) until the
// session waits on the user or terminates.
class DialogueDriver {
 public:
  DialogueDriver(DialogueContext ctx, InterpreterBackend& backend, SolutionCache* cache)
      : ctx_(std::move(ctx)), backend_(backend), cache_(cache) {}

  const DialogueContext& context() const { return ctx_; }

  DialogueSession submit(DialogueSession s, const Event& e) {
    s = advance(std::move(s), e, ctx_);
    return settle(std::move(s));
  }

  DialogueSession settle(DialogueSession s) {
    // Each stage runs at most a bounded number of times: one interpretation
    // per prompt (plus one intent re-interpretation) and one planning pass.
    for (int guard = 0; guard < 8; ++guard) {
      if (s.state == SessionState::Interpreting) {
        InterpretOptions opts;
        opts.intent_hint = s.intent_hint;
        InterpretResult r;
        try {
          r = interpret(s.prompt, *ctx_.db, backend_, opts);
        } catch (const BackendError& err) {
          s.state = SessionState::Failed;
          s.failure_reason = std::string("backend unavailable: ") + err.what();
          dialogue_detail::say(s, ctx_, "Fail", "The interpreter is unavailable; please try again later.");
          throw;
        }
        // Keep answers the user already gave.
        for (auto slot : s.clarified)
          if (const Slot* kept = s.goal.find(slot)) r.goal.set(*kept);
        s = advance(std::move(s), InterpretDone{std::move(r)}, ctx_);
      } else if (s.state == SessionState::Planning) {
        s = advance(std::move(s), PlanDone{plan_stage(s.goal)}, ctx_);
      } else {
        return s;
      }
    }
    return s;
  }

  PlanOutcome plan_stage(const GoalSpec& goal) {
    PlanOutcome o;
    try {
      if (goal.intent == Intent::InfoQuery) {
        const Slot* subjects = goal.find(SlotName::subjects);
        std::vector<std::string> codes;
        if (subjects)
          if (auto* l = std::get_if<LocationList>(&subjects->value)) codes = l->codes;
        o.facts_pddl = pddl::emit_facts(lookup_facts(*ctx_.db, codes));
        return o;
      }
      auto v = validate(goal, ctx_.decide.essential);
      if (!v.ok()) {
        o.failure = "goal is incomplete";
        return o;
      }
      SolveResult result;
      if (cache_) {
        auto cached = solve_cached(goal, *ctx_.db, *cache_);
        result = std::move(cached.result);
        o.cache_hit = cached.cache_hit;
      } else {
        result = solve(goal, *ctx_.db);
      }
      if (auto* inf = std::get_if<Infeasible>(&result)) {
        o.failure = inf->reason;
        return o;
      }
      o.plan = std::get<Plan>(result);
      o.compliance = verify(*o.plan, goal, *ctx_.db);
      o.problem_pddl = pddl::emit_problem(goal, lookup_facts(*ctx_.db, o.plan->path()));
    } catch (const UnknownLocationError& e) {
      o.failure = e.what();
    }
    return o;
  }

 private:
  DialogueContext ctx_;
  InterpreterBackend& backend_;
  SolutionCache* cache_;
};

}  // namespace vll
