#pragma once

// Evaluation harness: for each threshold, run the full clarification loop over
// a labeled suite with an oracle user answering from ground truth.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vll/dialogue.hpp"
#include "vll/suite.hpp"

namespace vll {

struct EvalPoint {
  double tau = 0.0;
  std::size_t total = 0;
  std::size_t retained = 0;  // accepted without clarification
  double coverage = 0.0;
  std::size_t retained_slots = 0;
  std::size_t retained_slots_correct = 0;
  double retained_accuracy = 0.0;  // 1 when nothing is retained
  double latency_mean_ms = 0.0;    // interpreter time per session, all rounds
  double latency_p50_ms = 0.0;
  double latency_p95_ms = 0.0;
  // End to end: interpreter time plus measured dialogue, planning and
  // verification time. Wall-clock, so not reproducible run to run.
  double e2e_mean_ms = 0.0;
  double e2e_p50_ms = 0.0;
  double e2e_p95_ms = 0.0;
  std::map<std::string, std::size_t> rounds;  // "0", "1", ... and "failed"
  std::size_t delivered = 0;
};

struct EvalResult {
  std::string backend;
  std::vector<std::uint64_t> seeds;
  std::size_t suite_size = 0;
  std::vector<EvalPoint> points;
};

struct EvalConfig {
  const LogisticsDatabase* db = nullptr;
  BackendConfig backend;
  const CalibrationHead* head = nullptr;
  std::vector<double> sweep;
  std::vector<std::uint64_t> seeds;
  int max_rounds = 3;
};

// "a:b:step", inclusive of b up to rounding.
inline std::vector<double> parse_sweep(std::string_view spec) {
  auto parts = text::split(spec, ':');
  if (parts.size() != 3) throw std::invalid_argument("sweep expects start:stop:step");
  auto a = text::parse_number(parts[0]), b = text::parse_number(parts[1]), s = text::parse_number(parts[2]);
  if (!a || !b || !s || *s <= 0.0 || *b < *a || *a < 0.0 || *b > 1.0)
    throw std::invalid_argument("sweep expects 0 <= start <= stop <= 1 and step > 0");
  long n = std::lround(std::floor((*b - *a) / *s + 1e-9));
  std::vector<double> out;
  for (long i = 0; i <= n; ++i) out.push_back(std::round((*a + static_cast<double>(i) * *s) * 1e9) / 1e9);
  return out;
}

// Answers every pending question from the truth goal.
inline UserAnswer oracle_answer(const DialogueSession& s, const GoalSpec& truth) {
  UserAnswer ua;
  for (const auto& q : s.pending) {
    if (!q.slot) {
      ua.answers.push_back({std::nullopt, truth.intent == Intent::InfoQuery ? "info" : "plan"});
      continue;
    }
    const Slot* t = truth.find(*q.slot);
    const Slot* cur = s.goal.find(*q.slot);
    const Slot* src = t ? t : cur;
    std::string value;
    if (src) {
      if (auto* b = std::get_if<bool>(&src->value)) value = *b ? "yes" : "no";
      else value = scripted::surface(src->value);
    }
    if (value.empty()) value = q.options.empty() ? "0" : q.options.front();
    ua.answers.push_back({q.slot, value});
  }
  return ua;
}

inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

inline EvalResult run_eval(const EvalConfig& cfg, const std::vector<LabeledPrompt>& suite) {
  if (suite.empty()) throw std::invalid_argument("empty prompt suite");
  if (cfg.sweep.empty()) throw std::invalid_argument("empty threshold sweep");
  if (!cfg.db) throw std::invalid_argument("eval needs a database");
  EvalResult result;
  result.seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.backend.seed.value_or(0)} : cfg.seeds;
  result.suite_size = suite.size();
  SolutionCache cache(4096);

  for (double tau : cfg.sweep) {
    EvalPoint pt;
    pt.tau = tau;
    std::vector<double> latencies, e2e;
    ThresholdPolicy policy = ThresholdPolicy::fixed(tau);
    DialogueContext ctx;
    ctx.db = cfg.db;
    ctx.head = cfg.head;
    ctx.policy = &policy;
    for (auto seed : result.seeds) {
      BackendConfig bc = cfg.backend;
      bc.seed = seed;
      std::unique_ptr<InterpreterBackend> backend;
      if (bc.kind == BackendKind::scripted) backend = std::make_unique<ScriptedBackend>(bc.profile, seed);
      else throw std::invalid_argument("eval runs against the scripted backend");
      result.backend = backend->id();
      DialogueDriver driver(ctx, *backend, &cache);
      for (const auto& lp : suite) {
        auto t0 = std::chrono::steady_clock::now();
        DialogueSession s;
        s.max_rounds = cfg.max_rounds;
        s = driver.submit(std::move(s), UserPrompt{lp.prompt});
        while (s.state == SessionState::AwaitingClarification) {
          std::size_t pending = s.pending.size();
          s = driver.submit(std::move(s), oracle_answer(s, lp.truth));
          if (s.state == SessionState::AwaitingClarification && s.pending.size() == pending &&
              s.turns.back().event == "Reask")
            break;  // the oracle cannot satisfy this question
        }
        ++pt.total;
        latencies.push_back(s.interpret_latency_ms);
        double local = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        e2e.push_back(s.interpret_latency_ms + local);
        if (s.initial_report && s.initial_report->decision == Decision::Accept) {
          ++pt.retained;
          for (const auto& [slot, ok] : slot_correctness(s.initial_goal, lp.truth)) {
            ++pt.retained_slots;
            pt.retained_slots_correct += ok ? 1 : 0;
          }
        }
        if (s.state == SessionState::Delivered) ++pt.delivered;
        std::string bucket =
            s.state == SessionState::Failed && s.failure_reason == "unresolved ambiguity" ? "failed"
            : s.state == SessionState::AwaitingClarification                             ? "failed"
                                                                                         : std::to_string(s.round_count);
        ++pt.rounds[bucket];
      }
    }
    pt.coverage = static_cast<double>(pt.retained) / static_cast<double>(pt.total);
    pt.retained_accuracy = pt.retained_slots == 0 ? 1.0
                                                  : static_cast<double>(pt.retained_slots_correct) /
                                                        static_cast<double>(pt.retained_slots);
    double sum = 0.0;
    for (double l : latencies) sum += l;
    pt.latency_mean_ms = sum / static_cast<double>(latencies.size());
    pt.latency_p50_ms = percentile(latencies, 0.5);
    pt.latency_p95_ms = percentile(latencies, 0.95);
    sum = 0.0;
    for (double l : e2e) sum += l;
    pt.e2e_mean_ms = sum / static_cast<double>(e2e.size());
    pt.e2e_p50_ms = percentile(e2e, 0.5);
    pt.e2e_p95_ms = percentile(e2e, 0.95);
    result.points.push_back(std::move(pt));
  }
  return result;
}

namespace eval_detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace eval_detail

inline nlohmann::json eval_to_json(const EvalResult& r) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : r.points)
    points.push_back({{"tau", p.tau},
                      {"total", p.total},
                      {"retained", p.retained},
                      {"coverage", p.coverage},
                      {"retained_accuracy", p.retained_accuracy},
                      {"retained_slots", p.retained_slots},
                      {"latency_mean_ms", p.latency_mean_ms},
                      {"latency_p50_ms", p.latency_p50_ms},
                      {"latency_p95_ms", p.latency_p95_ms},
                      {"delivered", p.delivered},
                      {"rounds", p.rounds},
                      {"measured", {{"e2e_mean_ms", p.e2e_mean_ms},
                                    {"e2e_p50_ms", p.e2e_p50_ms},
                                    {"e2e_p95_ms", p.e2e_p95_ms}}}});
  return {{"v", 1},
          {"backend", r.backend},
          {"seeds", r.seeds},
          {"suite_size", r.suite_size},
          {"latency_kind", "interpreter time per session summed over all interpretations"},
          {"latency_note", "external model latency comparisons are informational only"},
          {"measured_kind", "end to end per session: interpreter time plus measured in-process time; wall-clock"},
          {"points", points}};
}

inline std::string render_eval_table(const EvalResult& r) {
  using eval_detail::fixed;
  std::string out = "backend " + r.backend + ", suite " + std::to_string(r.suite_size) + " prompts, seeds";
  for (auto s : r.seeds) out += " " + std::to_string(s);
  out += "\n";
  out += "tau    coverage  retained_acc  retained  delivered  lat_mean_ms  lat_p50_ms  lat_p95_ms  rounds\n";
  for (const auto& p : r.points) {
    std::string rounds;
    for (const auto& [k, v] : p.rounds) rounds += (rounds.empty() ? "" : " ") + k + ":" + std::to_string(v);
    char line[256];
    std::snprintf(line, sizeof line, "%-6s %-9s %-13s %-9zu %-10zu %-12s %-11s %-11s %s\n", fixed(p.tau, 2).c_str(),
                  fixed(p.coverage, 4).c_str(), fixed(p.retained_accuracy, 4).c_str(), p.retained, p.delivered,
                  fixed(p.latency_mean_ms, 1).c_str(), fixed(p.latency_p50_ms, 1).c_str(),
                  fixed(p.latency_p95_ms, 1).c_str(), rounds.c_str());
    out += line;
  }
  out += "latency: simulated interpreter time (informational; not comparable to hosted model latency)\n";
  return out;
}

// Wall-clock block printed under the table; differs between runs.
inline std::string render_eval_measured(const EvalResult& r) {
  using eval_detail::fixed;
  std::string out = "end-to-end (measured: interpreter time plus in-process dialogue, planning, verification)\n";
  out += "tau    e2e_mean_ms  e2e_p50_ms  e2e_p95_ms\n";
  for (const auto& p : r.points) {
    char line[128];
    std::snprintf(line, sizeof line, "%-6s %-12s %-11s %s\n", fixed(p.tau, 2).c_str(), fixed(p.e2e_mean_ms, 1).c_str(),
                  fixed(p.e2e_p50_ms, 1).c_str(), fixed(p.e2e_p95_ms, 1).c_str());
    out += line;
  }
  return out;
}

// The JSON without its wall-clock fields: identical for identical inputs.
inline nlohmann::json eval_reproducible_json(const EvalResult& r) {
  auto j = eval_to_json(r);
  for (auto& p : j["points"]) p.erase("measured");
  return j;
}

}  // namespace vll
