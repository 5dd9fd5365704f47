#pragma once

// Client for an HTTP chat-completions service that returns token
// log-probabilities. The model is asked for a JSON goal object; tokens are
// attributed to slots by mapping their character offsets onto the value spans
// of that object.

#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include "httplib.h"
#include "json.hpp"
#include "vll/interpreter.hpp"

namespace vll {

namespace remote {

using Span = std::pair<std::size_t, std::size_t>;

// Byte spans of every object member value, keyed by dotted path ("slots.origin").
class SpanScanner {
 public:
  explicit SpanScanner(std::string_view s) : s_(s) {}

  std::map<std::string, Span> scan() {
    value("");
    return std::move(spans_);
  }

 private:
  void ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
  void expect(char c) {
    if (peek() != c) throw std::runtime_error(std::string("expected '") + c + "'");
    ++i_;
  }
  std::string string_lit() {
    expect('"');
    std::string out;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\' && i_ + 1 < s_.size()) {
        out.push_back(s_[i_ + 1]);
        i_ += 2;
      } else {
        out.push_back(s_[i_++]);
      }
    }
    expect('"');
    return out;
  }
  void value(const std::string& path) {
    ws();
    std::size_t begin = i_;
    switch (peek()) {
      case '{': {
        ++i_;
        ws();
        if (peek() == '}') {
          ++i_;
          break;
        }
        while (true) {
          ws();
          std::string key = string_lit();
          ws();
          expect(':');
          value(path.empty() ? key : path + "." + key);
          ws();
          if (peek() == ',') {
            ++i_;
            continue;
          }
          expect('}');
          break;
        }
        break;
      }
      case '[': {
        ++i_;
        ws();
        if (peek() == ']') {
          ++i_;
          break;
        }
        std::size_t idx = 0;
        while (true) {
          value(path + "[" + std::to_string(idx++) + "]");
          ws();
          if (peek() == ',') {
            ++i_;
            continue;
          }
          expect(']');
          break;
        }
        break;
      }
      case '"': string_lit(); break;
      default:
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.' ||
                                  s_[i_] == '-' || s_[i_] == '+'))
          ++i_;
        if (i_ == begin) throw std::runtime_error("unexpected character in JSON");
    }
    if (!path.empty()) spans_[path] = {begin, i_};
  }

  std::string_view s_;
  std::size_t i_ = 0;
  std::map<std::string, Span> spans_;
};

inline std::string system_prompt(const LogisticsDatabase& db, const InterpretOptions& opts) {
  std::ostringstream out;
  out << "You translate logistics requests into a JSON goal object. Reply with JSON only, of the form "
         "{\"intent\": \"InfoQuery\"|\"PlanRequest\"|\"Unknown\", \"slots\": {...}}. Slots: subjects (array of "
         "location codes), origin, destination (location code), objective (min_fuel_cost|min_time|min_risk), "
         "deadline (minutes), consider_weather (boolean), max_fuel, max_risk (numbers). Omit slots the request "
         "does not determine. Known locations:";
  for (const auto& l : db.locations()) {
    out << " " << l.code << " (" << l.name;
    for (const auto& a : l.aliases) out << "; " << a;
    out << ")";
  }
  out << ".";
  if (opts.intent_hint) out << " The user confirmed the intent is " << to_string(*opts.intent_hint) << ".";
  return out.str();
}

inline bool has_alnum(std::string_view s) {
  for (char c : s)
    if (std::isalnum(static_cast<unsigned char>(c))) return true;
  return false;
}

}  // namespace remote

// Decodes a chat-completions response body into an InterpretResult. Anything
// that fails the goal schema becomes intent=Unknown with a diagnostic. With a
// database, codes found neither there nor in the prompt are rejected.
inline InterpretResult decode_completion(std::string_view prompt, std::string_view body,
                                         const LogisticsDatabase* db = nullptr) {
  InterpretResult r;
  r.backend_id = "remote";
  r.goal.raw_prompt = std::string(prompt);
  auto unknown = [&](const std::string& why) {
    r.goal.intent = Intent::Unknown;
    r.goal.slots.clear();
    r.trace = {};
    r.diagnostics.push_back(why);
    return r;
  };

  nlohmann::json resp = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
  if (resp.is_discarded()) return unknown("response body is not JSON");
  const nlohmann::json* choice = nullptr;
  if (resp.contains("choices") && resp["choices"].is_array() && !resp["choices"].empty())
    choice = &resp["choices"][0];
  if (!choice || !choice->contains("message") || !(*choice)["message"].contains("content") ||
      !(*choice)["message"]["content"].is_string())
    return unknown("response has no message content");
  std::string content = (*choice)["message"]["content"].get<std::string>();

  nlohmann::json out = nlohmann::json::parse(content, nullptr, false);
  if (out.is_discarded() || !out.is_object()) return unknown("model output is not a JSON object");
  auto intent = out.contains("intent") && out["intent"].is_string() ? parse_intent(out["intent"].get<std::string>())
                                                                     : std::nullopt;
  if (!intent) return unknown("model output has no valid intent");
  r.goal.intent = *intent;
  try {
    if (out.contains("slots")) {
      if (!out["slots"].is_object()) return unknown("'slots' is not an object");
      for (const auto& [key, val] : out["slots"].items()) {
        auto name = parse_slot_name(key);
        if (!name) return unknown("unknown slot '" + key + "'");
        const auto& raw = val.is_object() && val.contains("value") ? val["value"] : val;
        auto value = detail::value_from_json(*name, raw);
        r.goal.set(Slot{*name, std::move(value), std::nullopt, Provenance::model});
      }
    }
  } catch (const GoalFormatError& e) {
    return unknown(e.what());
  }
  {
    const std::string upper_prompt = text::upper(prompt);
    for (const auto& [name, slot] : r.goal.slots) {
      std::vector<std::string> codes;
      if (auto* l = std::get_if<LocationList>(&slot.value)) codes = l->codes;
      if (auto* c = std::get_if<LocationCode>(&slot.value)) codes.push_back(c->code);
      for (const auto& c : codes) {
        if (!is_location_code(c)) return unknown("malformed location code '" + c + "'");
        if (db && !db->find_location(c) && upper_prompt.find(c) == std::string::npos)
          return unknown("location code '" + c + "' is not in the database or the prompt");
      }
    }
  }
  if (r.goal.intent == Intent::PlanRequest && !r.goal.has(SlotName::consider_weather))
    r.goal.set(Slot{SlotName::consider_weather, false, std::nullopt, Provenance::defaulted});

  std::map<std::string, remote::Span> spans;
  try {
    spans = remote::SpanScanner(content).scan();
  } catch (const std::exception& e) {
    return unknown(std::string("cannot map output offsets: ") + e.what());
  }
  auto slot_at = [&](std::size_t b, std::size_t e) -> std::optional<SlotName> {
    for (const auto& [name, slot] : r.goal.slots) {
      if (slot.provenance != Provenance::model) continue;
      auto it = spans.find("slots." + std::string(to_string(name)));
      if (it == spans.end()) continue;
      std::size_t lo = std::max(b, it->second.first), hi = std::min(e, it->second.second);
      if (lo < hi && remote::has_alnum(std::string_view(content).substr(lo, hi - lo))) return name;
    }
    return std::nullopt;
  };

  const nlohmann::json* lp = nullptr;
  if (choice->contains("logprobs") && (*choice)["logprobs"].is_object() &&
      (*choice)["logprobs"].contains("content") && (*choice)["logprobs"]["content"].is_array())
    lp = &(*choice)["logprobs"]["content"];

  if (!lp || lp->empty()) {
    // No log-probabilities: one certain token per slot value.
    r.trace.degraded = true;
    for (const auto& [name, slot] : r.goal.slots) {
      if (slot.provenance != Provenance::model) continue;
      auto it = spans.find("slots." + std::string(to_string(name)));
      std::string surface = it == spans.end() ? std::string(to_string(name))
                                              : content.substr(it->second.first, it->second.second - it->second.first);
      r.trace.tokens.push_back({surface, 0.0, {{surface, 0.0}}, name});
    }
    r.diagnostics.push_back("degraded_trace");
    return r;
  }

  std::size_t offset = 0;
  std::string joined;
  for (const auto& t : *lp) {
    if (!t.is_object() || !t.contains("token") || !t["token"].is_string() || !t.contains("logprob") ||
        !t["logprob"].is_number())
      return unknown("malformed logprobs entry");
    TraceToken tok;
    tok.text = t["token"].get<std::string>();
    tok.logprob = std::min(0.0, t["logprob"].get<double>());
    if (t.contains("top_logprobs") && t["top_logprobs"].is_array())
      for (const auto& a : t["top_logprobs"])
        if (a.is_object() && a.contains("token") && a["token"].is_string() && a.contains("logprob") &&
            a["logprob"].is_number())
          tok.alternatives.push_back({a["token"].get<std::string>(), std::min(0.0, a["logprob"].get<double>())});
    bool present = false;
    for (const auto& a : tok.alternatives) present = present || a.text == tok.text;
    if (!present) tok.alternatives.push_back({tok.text, tok.logprob});
    std::stable_sort(tok.alternatives.begin(), tok.alternatives.end(),
                     [](const Alternative& a, const Alternative& b) { return a.logprob > b.logprob; });
    tok.slot = slot_at(offset, offset + tok.text.size());
    offset += tok.text.size();
    joined += tok.text;
    r.trace.tokens.push_back(std::move(tok));
  }
  if (joined != content) r.diagnostics.push_back("token texts do not reproduce the message content");
  for (const auto& [name, slot] : r.goal.slots)
    if (slot.provenance == Provenance::model && r.trace.attributed(name).empty())
      return unknown("slot '" + std::string(to_string(name)) + "' has no attributed tokens");
  return r;
}

class RemoteBackend : public InterpreterBackend {
 public:
  RemoteBackend(RemoteConfig config, std::chrono::milliseconds timeout)
      : config_(std::move(config)), timeout_(timeout) {
    if (config_.endpoint.empty()) throw std::invalid_argument("remote backend requires an endpoint");
    if (config_.max_in_flight == 0) config_.max_in_flight = 1;
  }

  std::string id() const override { return "remote:" + config_.model; }

  InterpretResult run(std::string_view prompt, const LogisticsDatabase& db, const InterpretOptions& opts) override {
    InFlightGuard guard(*this);
    nlohmann::json req = {
        {"model", config_.model},
        {"messages",
         {{{"role", "system"}, {"content", remote::system_prompt(db, opts)}},
          {{"role", "user"}, {"content", std::string(prompt)}}}},
        {"temperature", 0},
        {"logprobs", true},
        {"top_logprobs", config_.top_logprobs},
        {"response_format", {{"type", "json_object"}}},
    };

    httplib::Client client(config_.endpoint);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto start = std::chrono::steady_clock::now();
    auto res = client.Post(config_.path, headers, req.dump(), "application/json");
    double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    if (!res) {
      auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
        throw BackendError(BackendError::Kind::timeout, "backend timed out: " + httplib::to_string(err));
      throw BackendError(BackendError::Kind::unreachable, "backend unreachable: " + httplib::to_string(err));
    }
    std::optional<int> retry_after;
    if (res->has_header("Retry-After")) {
      try {
        retry_after = std::stoi(res->get_header_value("Retry-After"));
      } catch (const std::exception&) {
      }
    }
    int status = res->status;
    std::string code = "HTTP " + std::to_string(status);
    if (status == 504 || status == 408) throw BackendError(BackendError::Kind::timeout, code + ": gateway timeout", retry_after);
    if (status == 401 || status == 403) throw BackendError(BackendError::Kind::auth, code + ": authentication failed", retry_after);
    if (status == 429 || status == 503) throw BackendError(BackendError::Kind::overloaded, code + ": backend overloaded", retry_after);
    if (status >= 400) throw BackendError(BackendError::Kind::http, code, retry_after);

    InterpretResult r = decode_completion(prompt, res->body, &db);
    r.backend_id = id();
    r.latency_ms = elapsed;
    return r;
  }

 private:
  // Bounds concurrent requests to max_in_flight.
  struct InFlightGuard {
    explicit InFlightGuard(RemoteBackend& b) : b_(b) {
      std::unique_lock lock(b_.mu_);
      b_.cv_.wait(lock, [&] { return b_.in_flight_ < b_.config_.max_in_flight; });
      ++b_.in_flight_;
    }
    ~InFlightGuard() {
      {
        std::lock_guard lock(b_.mu_);
        --b_.in_flight_;
      }
      b_.cv_.notify_one();
    }
    RemoteBackend& b_;
  };

  RemoteConfig config_;
  std::chrono::milliseconds timeout_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
};

}  // namespace vll
