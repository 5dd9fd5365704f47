#pragma once

// Interpretation backends: map a free-form prompt to a GoalSpec plus the
// token trace (chosen log-probability, top-k alternatives, slot attribution)
// that confidence scoring consumes.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vll/domain_db.hpp"
#include "vll/goal_spec.hpp"
#include "vll/text.hpp"

namespace vll {

struct Alternative {
  std::string text;
  double logprob = 0.0;
  bool operator==(const Alternative&) const = default;
};

struct TraceToken {
  std::string text;
  double logprob = 0.0;
  std::vector<Alternative> alternatives;  // sorted by descending logprob
  std::optional<SlotName> slot;
  bool operator==(const TraceToken&) const = default;
};

struct TokenTrace {
  std::vector<TraceToken> tokens;
  bool degraded = false;  // backend returned no log-probabilities
  bool operator==(const TokenTrace&) const = default;

  std::vector<const TraceToken*> attributed(SlotName s) const {
    std::vector<const TraceToken*> out;
    for (const auto& t : tokens)
      if (t.slot == s) out.push_back(&t);
    return out;
  }
};

// Empty when the trace satisfies its invariants.
inline std::vector<std::string> trace_problems(const TokenTrace& trace) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < trace.tokens.size(); ++i) {
    const auto& t = trace.tokens[i];
    std::string at = "token " + std::to_string(i) + " ('" + t.text + "')";
    if (!(t.logprob <= 0.0)) out.push_back(at + ": chosen logprob > 0");
    if (t.alternatives.empty()) out.push_back(at + ": no alternatives");
    bool found = false;
    for (std::size_t j = 0; j < t.alternatives.size(); ++j) {
      if (j > 0 && t.alternatives[j].logprob > t.alternatives[j - 1].logprob)
        out.push_back(at + ": alternatives not sorted");
      if (t.alternatives[j].text == t.text) found = true;
    }
    if (!found) out.push_back(at + ": chosen token missing from alternatives");
  }
  return out;
}

struct InterpretResult {
  GoalSpec goal;
  TokenTrace trace;
  std::string backend_id;
  double latency_ms = 0.0;
  std::vector<std::string> diagnostics;
};

struct InterpretOptions {
  std::optional<Intent> intent_hint;  // set when the user has resolved the intent kind
};

struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Remote failures. `retry_after_s` is filled from a Retry-After header when present.
struct BackendError : std::runtime_error {
  enum class Kind { timeout, unreachable, auth, http, overloaded };
  BackendError(Kind kind, const std::string& what, std::optional<int> retry_after_s = std::nullopt)
      : std::runtime_error(what), kind(kind), retry_after_s(retry_after_s) {}
  Kind kind;
  std::optional<int> retry_after_s;
};

class InterpreterBackend {
 public:
  virtual ~InterpreterBackend() = default;
  virtual std::string id() const = 0;
  virtual InterpretResult run(std::string_view prompt, const LogisticsDatabase& db, const InterpretOptions& opts) = 0;
};

// Entry point: enforces the non-empty precondition, then delegates.
inline InterpretResult interpret(std::string_view prompt, const LogisticsDatabase& db, InterpreterBackend& backend,
                                 const InterpretOptions& opts = {}) {
  if (text::trim(prompt).empty()) throw PreconditionError("prompt is empty");
  return backend.run(prompt, db, opts);
}

// ---------------------------------------------------------------------------
// Configuration

// Noise model for the scripted backend. Every slot is corrupted with its error
// rate; `coupling` is the probability that the emitted distribution tells the
// truth (flat for corrupted values, peaked for correct ones).
struct NoiseProfile {
  double error_rate = 0.0;
  std::map<SlotName, double> slot_error_rates;
  double coupling = 1.0;
  double clean_top_min = 0.92;
  double clean_top_max = 0.99;
  double miscoupled_top_min = 0.5;
  double miscoupled_top_max = 0.9;
  int flat_k = 4;
  double base_latency_ms = 40.0;
  double per_token_latency_ms = 2.0;

  double rate(SlotName s) const {
    auto it = slot_error_rates.find(s);
    return it == slot_error_rates.end() ? error_rate : it->second;
  }
};

struct RemoteConfig {
  std::string endpoint;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key;
  int top_logprobs = 5;
  std::size_t max_in_flight = 4;
};

enum class BackendKind { scripted, remote };

struct BackendConfig {
  BackendKind kind = BackendKind::scripted;
  NoiseProfile profile;
  std::optional<std::uint64_t> seed;
  RemoteConfig remote;
  std::chrono::milliseconds timeout{10000};

  void check() const {
    if (kind == BackendKind::remote && remote.endpoint.empty())
      throw std::invalid_argument("remote backend requires an endpoint");
    if (kind == BackendKind::scripted && !seed) throw std::invalid_argument("scripted backend requires a seed");
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(profile.error_rate) || !unit(profile.coupling))
      throw std::invalid_argument("noise rates must lie in [0,1]");
    for (const auto& [s, r] : profile.slot_error_rates)
      if (!unit(r)) throw std::invalid_argument("noise rates must lie in [0,1]");
    if (profile.flat_k < 1) throw std::invalid_argument("flat_k must be >= 1");
  }
};

}  // namespace vll
