#pragma once

// Session registry behind the HTTP API. Every response is a (status, JSON body)
// pair; responses to a client turn id are stored and replayed verbatim.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "vll/dialogue.hpp"
#include "vll/refinement.hpp"
#include "vll/service/config.hpp"
#include "vll/wire.hpp"

namespace vll {

struct ServiceResponse {
  int status = 200;
  std::string body;
  std::optional<int> retry_after_s;
};

inline ServiceResponse error_response(int status, const std::string& message) {
  return {status, nlohmann::json{{"v", 1}, {"error", {{"status", status}, {"message", message}}}}.dump(), {}};
}

inline std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// Append-only JSONL transcript, one event per line.
class TranscriptWriter {
 public:
  explicit TranscriptWriter(std::filesystem::path path) : path_(std::move(path)) {}

  void append(const nlohmann::json& event) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to transcript " + path_.string());
    out << event.dump() << "\n";
    out.flush();
    if (!out) throw std::runtime_error("transcript write failed: " + path_.string());
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct SessionServiceOptions {
  int max_rounds = 3;
  std::size_t cache_size = 1024;
  std::filesystem::path transcript_dir;  // empty keeps transcripts in memory only
  std::filesystem::path records;         // empty keeps records in memory only
  std::function<std::int64_t()> clock = wall_clock_ms;
};

class SessionService {
 public:
  SessionService(const LogisticsDatabase& db, std::unique_ptr<InterpreterBackend> backend, ThresholdPolicy policy,
                 std::optional<CalibrationHead> head, SessionServiceOptions opts)
      : db_(db),
        backend_(std::move(backend)),
        policy_(std::move(policy)),
        head_(std::move(head)),
        opts_(std::move(opts)),
        cache_(opts_.cache_size) {}

  const LogisticsDatabase& database() const { return db_; }
  RecordStore& records() { return records_; }
  const ThresholdPolicy& policy() const { return policy_; }

  ServiceResponse create_session(std::optional<int> max_rounds = std::nullopt) {
    if (max_rounds && *max_rounds < 0) return error_response(422, "max_rounds must be >= 0");
    auto entry = std::make_shared<Entry>();
    {
      std::lock_guard lock(mu_);
      do {
        entry->session.id = "s" + std::to_string(++next_id_);
      } while (!opts_.transcript_dir.empty() &&
               std::filesystem::exists(opts_.transcript_dir / (entry->session.id + ".jsonl")));
      entry->session.max_rounds = max_rounds.value_or(opts_.max_rounds);
      if (!opts_.transcript_dir.empty())
        entry->transcript.emplace(opts_.transcript_dir / (entry->session.id + ".jsonl"));
      sessions_[entry->session.id] = entry;
    }
    log(*entry, {{"v", 1}, {"kind", "session"}, {"id", entry->session.id}, {"max_rounds", entry->session.max_rounds}});
    return {201, view(*entry).dump(), {}};
  }

  ServiceResponse post_message(const std::string& id, const std::string& turn_id, const std::string& text) {
    return submit(id, turn_id, UserPrompt{text},
                  {{"v", 1}, {"kind", "user"}, {"event", "UserPrompt"}, {"turn_id", turn_id}, {"text", text}});
  }

  ServiceResponse post_clarification(const std::string& id, const std::string& turn_id,
                                     const std::vector<Answer>& answers) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& ans : answers)
      a.push_back({{"slot", ans.slot ? std::string(to_string(*ans.slot)) : std::string("intent")}, {"value", ans.value}});
    return submit(id, turn_id, UserAnswer{answers},
                  {{"v", 1}, {"kind", "user"}, {"event", "UserAnswer"}, {"turn_id", turn_id}, {"answers", a}});
  }

  ServiceResponse get_session(const std::string& id) {
    auto e = find(id);
    if (!e) return error_response(404, "unknown session " + id);
    std::lock_guard lock(e->mu);
    return {200, view(*e).dump(), {}};
  }

  ServiceResponse get_plan(const std::string& id) {
    auto e = find(id);
    if (!e) return error_response(404, "unknown session " + id);
    std::lock_guard lock(e->mu);
    const auto& s = e->session;
    if (s.state != SessionState::Delivered || !s.outcome || !s.outcome->plan)
      return error_response(409, "no delivered plan in state " + std::string(to_string(s.state)));
    nlohmann::json body = {{"v", 1},
                           {"id", s.id},
                           {"plan", wire::to_json(*s.outcome->plan)},
                           {"compliance", wire::to_json(*s.outcome->compliance)},
                           {"feedback", verdict_to_feedback(*s.outcome->compliance)},
                           {"plan_text", render_plan(*s.outcome->plan)},
                           {"problem_pddl", s.outcome->problem_pddl},
                           {"cache_hit", s.outcome->cache_hit}};
    return {200, body.dump(), {}};
  }

  ServiceResponse health() {
    std::size_t n;
    {
      std::lock_guard lock(mu_);
      n = sessions_.size();
    }
    nlohmann::json body = {{"v", 1},
                           {"status", "ok"},
                           {"backend", backend_->id()},
                           {"db_version", db_.version()},
                           {"threshold", policy_.current()},
                           {"sessions", n}};
    return {200, body.dump(), {}};
  }

  // Only for tests: the in-memory session.
  std::optional<DialogueSession> session(const std::string& id) {
    auto e = find(id);
    if (!e) return std::nullopt;
    std::lock_guard lock(e->mu);
    return e->session;
  }

 private:
  struct Entry {
    std::mutex mu;  // one in-flight event per session
    DialogueSession session;
    std::map<std::string, ServiceResponse> replies;  // by client turn id
    std::optional<TranscriptWriter> transcript;
    std::vector<nlohmann::json> events;
  };

  std::shared_ptr<Entry> find(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  void log(Entry& e, nlohmann::json event) {
    if (e.transcript) e.transcript->append(event);
    e.events.push_back(std::move(event));
  }

  nlohmann::json view(const Entry& e) const {
    auto v = wire::session_view(e.session);
    v["threshold"] = e.session.report ? e.session.report->threshold : policy_.current();
    return v;
  }

  DialogueContext context() const {
    DialogueContext ctx;
    ctx.db = &db_;
    ctx.head = head_ ? &*head_ : nullptr;
    ctx.policy = &policy_;
    ctx.clock = opts_.clock;
    return ctx;
  }

  ServiceResponse submit(const std::string& id, const std::string& turn_id, const Event& event,
                         nlohmann::json user_event) {
    if (turn_id.empty()) return error_response(422, "turn_id is required");
    auto e = find(id);
    if (!e) return error_response(404, "unknown session " + id);
    std::lock_guard lock(e->mu);
    if (auto it = e->replies.find(turn_id); it != e->replies.end()) return it->second;

    DialogueSession before = e->session;
    std::size_t turns_before = before.turns.size();
    DialogueDriver driver(context(), *backend_, &cache_);
    ServiceResponse resp;
    try {
      e->session = driver.submit(e->session, event);
    } catch (const ProtocolError& err) {
      resp = error_response(409, err.what());
      e->replies[turn_id] = resp;
      return resp;
    } catch (const PreconditionError& err) {
      resp = error_response(422, err.what());
      e->replies[turn_id] = resp;
      return resp;
    } catch (const BackendError& err) {
      // Nothing happened from the client's point of view; a retry may succeed.
      e->session = std::move(before);
      resp = error_response(503, std::string("interpreter backend unavailable: ") + err.what());
      resp.retry_after_s = err.retry_after_s;
      return resp;
    }

    log(*e, std::move(user_event));
    const auto& s = e->session;
    for (std::size_t i = turns_before; i < s.turns.size(); ++i) {
      const auto& t = s.turns[i];
      if (t.role != Turn::Role::system) continue;
      log(*e, {{"v", 1}, {"kind", "system"}, {"event", t.event}, {"text", t.text}, {"state", to_string(s.state)}});
    }
    if ((s.state == SessionState::Delivered || s.state == SessionState::Failed) && before.state != s.state)
      finish(s);

    resp = {200, view(*e).dump(), {}};
    e->replies[turn_id] = resp;
    return resp;
  }

  // Records the finished session and feeds the adaptive threshold.
  void finish(const DialogueSession& s) {
    {
      std::lock_guard lock(records_mu_);
      InteractionRecord r = record_from_session(s, db_);
      r.seq = records_.size() + 1;
      if (!opts_.records.empty()) {
        std::ofstream out(opts_.records, std::ios::binary | std::ios::app);
        out << record_to_json(r).dump() << "\n";
      }
      records_.append(std::move(r));
    }
    if (s.initial_report)
      for (const auto& score : s.initial_report->slots) {
        if (!score.present) continue;
        bool correct = true;
        if (s.clarified.count(score.slot)) {
          const Slot* a = s.initial_goal.find(score.slot);
          const Slot* b = s.goal.find(score.slot);
          correct = a && b && a->value == b->value;
        } else if (s.state != SessionState::Delivered) {
          continue;
        }
        policy_.observe(score.calibrated, correct);
      }
  }

  const LogisticsDatabase& db_;
  std::unique_ptr<InterpreterBackend> backend_;
  mutable ThresholdPolicy policy_;
  std::optional<CalibrationHead> head_;
  SessionServiceOptions opts_;
  SolutionCache cache_;
  RecordStore records_;
  std::mutex records_mu_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 0;
};

// ---------------------------------------------------------------------------
// Transcript replay

struct ReplayResult {
  bool match = true;
  std::vector<std::string> expected;  // persisted system messages
  std::vector<std::string> actual;    // regenerated system messages
};

inline std::vector<nlohmann::json> read_transcript(std::string_view body) {
  std::vector<nlohmann::json> out;
  for (const auto& line : text::split(body, '\n'))
    if (!text::trim(line).empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

inline std::vector<Answer> answers_from_json(const nlohmann::json& a) {
  std::vector<Answer> out;
  for (const auto& x : a) {
    Answer ans;
    std::string slot = x.at("slot").get<std::string>();
    if (slot != "intent") ans.slot = wire::slot_from(x.at("slot"));
    ans.value = x.at("value").get<std::string>();
    out.push_back(ans);
  }
  return out;
}

// Feeds the transcript's user events into `fresh` and compares system messages.
inline ReplayResult replay_transcript(const std::vector<nlohmann::json>& events, SessionService& fresh) {
  ReplayResult r;
  std::optional<int> max_rounds;
  for (const auto& ev : events)
    if (ev.value("kind", "") == "session") max_rounds = ev.at("max_rounds").get<int>();
  auto created = nlohmann::json::parse(fresh.create_session(max_rounds).body);
  std::string id = created.at("id").get<std::string>();
  std::size_t seen = 0;
  for (const auto& ev : events) {
    std::string kind = ev.value("kind", "");
    if (kind == "system") r.expected.push_back(ev.at("text").get<std::string>());
    if (kind != "user") continue;
    std::string turn = ev.at("turn_id").get<std::string>();
    if (ev.at("event") == "UserPrompt") fresh.post_message(id, turn, ev.at("text").get<std::string>());
    else fresh.post_clarification(id, turn, answers_from_json(ev.at("answers")));
    auto s = fresh.session(id);
    for (; seen < s->turns.size(); ++seen)
      if (s->turns[seen].role == Turn::Role::system) r.actual.push_back(s->turns[seen].text);
  }
  r.match = r.expected == r.actual;
  return r;
}

}  // namespace vll
