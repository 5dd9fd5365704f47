#pragma once

// Interaction records and the four dataset exports (sft, contrastive,
// self_train, reward). Datasets are JSONL, one canonical record per line, with
// a JSON manifest sidecar.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "vll/dialogue.hpp"
#include "vll/hash.hpp"
#include "vll/scripted_backend.hpp"
#include "vll/wire.hpp"

namespace vll {

enum class LabelSource { human_clarified, pseudo, unlabeled };

inline std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::human_clarified: return "human_clarified";
    case LabelSource::pseudo: return "pseudo";
    case LabelSource::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

inline std::optional<LabelSource> parse_label_source(std::string_view s) {
  if (s == "human_clarified") return LabelSource::human_clarified;
  if (s == "pseudo") return LabelSource::pseudo;
  if (s == "unlabeled") return LabelSource::unlabeled;
  return std::nullopt;
}

struct ClarificationExchange {
  std::string question;
  std::string answer;
  bool operator==(const ClarificationExchange&) const = default;
};

struct InteractionRecord {
  std::uint64_t seq = 0;  // assigned by the store
  std::int64_t timestamp_ms = 0;
  std::string prompt;
  std::string template_class;
  GoalSpec initial_goal;
  ConfidenceReport initial_report;
  std::vector<ClarificationExchange> clarifications;
  int rounds = 0;
  bool human_confirmed = false;
  GoalSpec final_goal;
  ConfidenceReport final_report;
  bool verified = false;  // delivered with an all-pass compliance report
  std::map<SlotName, FieldFeatures> features;
  LabelSource label = LabelSource::unlabeled;
  std::map<SlotName, bool> slot_correct;  // initial goal vs ground truth, when known
  std::optional<double> admitted_confidence;

  // Whether the model's initial goal was right: ground truth when recorded,
  // otherwise "verified and nothing had to be corrected".
  bool initial_correct() const {
    if (!slot_correct.empty()) {
      for (const auto& [_, ok] : slot_correct)
        if (!ok) return false;
      return true;
    }
    return verified && initial_goal.intent == final_goal.intent &&
           goal_to_json(initial_goal, false, false) == goal_to_json(final_goal, false, false);
  }
};

// Locations and digits masked, so prompts from one template share a class.
inline std::string template_class(std::string_view prompt, const LogisticsDatabase& db) {
  std::string s(prompt);
  auto mentions = scripted::find_mentions(prompt, db);
  for (auto it = mentions.rbegin(); it != mentions.rend(); ++it) s.replace(it->begin, it->end - it->begin, "<loc>");
  static const std::regex digits(R"(\d+(\.\d+)?)");
  s = std::regex_replace(s, digits, "<n>");
  return text::lower(s);
}

// Builds a record from a finished session.
inline InteractionRecord record_from_session(const DialogueSession& s, const LogisticsDatabase& db) {
  if (s.state != SessionState::Delivered && s.state != SessionState::Failed)
    throw std::invalid_argument("session has not finished");
  InteractionRecord r;
  r.prompt = s.prompt;
  r.template_class = template_class(s.prompt, db);
  r.initial_goal = s.initial_goal;
  if (s.initial_report) r.initial_report = *s.initial_report;
  r.final_goal = s.goal;
  if (s.report) r.final_report = *s.report;
  r.rounds = s.round_count;
  for (std::size_t i = 0; i + 1 < s.turns.size(); ++i) {
    const auto& q = s.turns[i];
    if (q.event != "Clarify" && q.event != "Reask") continue;
    for (std::size_t j = i + 1; j < s.turns.size(); ++j)
      if (s.turns[j].event == "UserAnswer") {
        r.clarifications.push_back({q.text, s.turns[j].text});
        break;
      }
  }
  r.verified = s.state == SessionState::Delivered && s.outcome &&
               (!s.outcome->compliance || s.outcome->compliance->overall);
  for (const auto& [name, slot] : s.initial_goal.slots)
    if (slot.provenance == Provenance::model && !s.trace.attributed(name).empty())
      r.features[name] = field_features(s.trace, name);
  r.label = r.clarifications.empty() ? LabelSource::unlabeled : LabelSource::human_clarified;
  if (!s.turns.empty()) r.timestamp_ms = s.turns.back().timestamp_ms;
  return r;
}

inline nlohmann::json record_to_json(const InteractionRecord& r) {
  nlohmann::json clar = nlohmann::json::array();
  for (const auto& c : r.clarifications) clar.push_back({{"question", c.question}, {"answer", c.answer}});
  nlohmann::json feats = nlohmann::json::object();
  for (const auto& [k, f] : r.features) feats[std::string(to_string(k))] = wire::to_json(f);
  nlohmann::json correct = nlohmann::json::object();
  for (const auto& [k, v] : r.slot_correct) correct[std::string(to_string(k))] = v;
  return {{"v", 1},
          {"seq", r.seq},
          {"timestamp_ms", r.timestamp_ms},
          {"prompt", r.prompt},
          {"template_class", r.template_class},
          {"initial_goal", goal_to_json(r.initial_goal)},
          {"initial_report", wire::to_json(r.initial_report)},
          {"clarifications", clar},
          {"rounds", r.rounds},
          {"human_confirmed", r.human_confirmed},
          {"final_goal", goal_to_json(r.final_goal)},
          {"final_report", wire::to_json(r.final_report)},
          {"verified", r.verified},
          {"features", feats},
          {"label", to_string(r.label)},
          {"slot_correct", correct},
          {"admitted_confidence",
           r.admitted_confidence ? nlohmann::json(*r.admitted_confidence) : nlohmann::json(nullptr)}};
}

inline InteractionRecord record_from_json(const nlohmann::json& j) {
  InteractionRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  r.prompt = j.at("prompt").get<std::string>();
  r.template_class = j.at("template_class").get<std::string>();
  r.initial_goal = goal_from_json(j.at("initial_goal"));
  r.initial_report = wire::report_from_json(j.at("initial_report"));
  for (const auto& c : j.at("clarifications"))
    r.clarifications.push_back({c.at("question").get<std::string>(), c.at("answer").get<std::string>()});
  r.rounds = j.at("rounds").get<int>();
  r.human_confirmed = j.at("human_confirmed").get<bool>();
  r.final_goal = goal_from_json(j.at("final_goal"));
  r.final_report = wire::report_from_json(j.at("final_report"));
  r.verified = j.at("verified").get<bool>();
  for (const auto& [k, f] : j.at("features").items()) r.features[wire::slot_from(k)] = wire::features_from_json(f);
  auto label = parse_label_source(j.at("label").get<std::string>());
  if (!label) throw wire::WireError("unknown label source");
  r.label = *label;
  for (const auto& [k, v] : j.at("slot_correct").items()) r.slot_correct[wire::slot_from(k)] = v.get<bool>();
  if (!j.at("admitted_confidence").is_null()) r.admitted_confidence = j.at("admitted_confidence").get<double>();
  return r;
}

// Append-only record store. Snapshots share immutable records, so exporters
// never hold the lock while writers append.
class RecordStore {
 public:
  using Snapshot = std::vector<std::shared_ptr<const InteractionRecord>>;

  std::uint64_t append(InteractionRecord r) {
    if (r.label == LabelSource::human_clarified && r.clarifications.empty() && !r.human_confirmed)
      throw std::invalid_argument("human_clarified records need a clarification turn or a confirmation");
    if (r.label == LabelSource::pseudo && !r.admitted_confidence)
      throw std::invalid_argument("pseudo records must carry their admitting confidence");
    std::lock_guard lock(mu_);
    r.seq = records_.size() + 1;
    records_.push_back(std::make_shared<const InteractionRecord>(std::move(r)));
    return records_.back()->seq;
  }

  Snapshot snapshot() const {
    std::lock_guard lock(mu_);
    return records_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return records_.size();
  }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : snapshot()) out += record_to_json(*r).dump() + "\n";
    return out;
  }

  // Appends records read from JSONL; their sequence numbers must continue the store's.
  void load_jsonl(std::string_view body) {
    std::size_t lineno = 0;
    for (const auto& line : text::split(body, '\n')) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      InteractionRecord r;
      try {
        r = record_from_json(nlohmann::json::parse(line));
      } catch (const std::exception& e) {
        throw std::runtime_error("record store line " + std::to_string(lineno) + ": " + e.what());
      }
      std::uint64_t seq = r.seq;
      if (append(std::move(r)) != seq)
        throw std::runtime_error("record store line " + std::to_string(lineno) + ": sequence gap");
    }
  }

 private:
  mutable std::mutex mu_;
  Snapshot records_;
};

// ---------------------------------------------------------------------------
// Exports

enum class DatasetKind { sft, contrastive, self_train, reward };

inline std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::sft: return "sft";
    case DatasetKind::contrastive: return "contrastive";
    case DatasetKind::self_train: return "self_train";
    case DatasetKind::reward: return "reward";
  }
  return "sft";
}

inline std::optional<DatasetKind> parse_dataset_kind(std::string_view s) {
  for (auto k : {DatasetKind::sft, DatasetKind::contrastive, DatasetKind::self_train, DatasetKind::reward})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct ExportFilter {
  std::optional<double> min_confidence;
  std::optional<double> max_confidence;
  std::optional<std::int64_t> from_ms;
  std::optional<std::int64_t> to_ms;
  std::optional<std::size_t> limit;

  bool admits(const InteractionRecord& r, double confidence) const {
    if (min_confidence && confidence < *min_confidence) return false;
    if (max_confidence && confidence > *max_confidence) return false;
    if (from_ms && r.timestamp_ms < *from_ms) return false;
    if (to_ms && r.timestamp_ms > *to_ms) return false;
    return true;
  }
};

struct DatasetManifest {
  DatasetKind kind = DatasetKind::sft;
  nlohmann::json parameters = nlohmann::json::object();
  std::size_t count = 0;
  std::size_t snapshot_size = 0;
  std::string sha256;

  nlohmann::json to_json() const {
    return {{"v", 1},
            {"kind", to_string(kind)},
            {"parameters", parameters},
            {"count", count},
            {"snapshot_size", snapshot_size},
            {"sha256", sha256}};
  }
  std::string render() const { return to_json().dump(2) + "\n"; }
};

struct Dataset {
  std::vector<std::string> lines;  // canonical JSON, no newline
  DatasetManifest manifest;

  std::string bytes() const {
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
  }
};

struct EmptyExportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace refinement_detail {

inline nlohmann::json filter_params(const ExportFilter& f) {
  auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(nullptr); };
  return {{"min_confidence", opt(f.min_confidence)},
          {"max_confidence", opt(f.max_confidence)},
          {"from_ms", opt(f.from_ms)},
          {"to_ms", opt(f.to_ms)},
          {"limit", opt(f.limit)}};
}

inline Dataset finish(DatasetKind kind, std::vector<std::string> lines, nlohmann::json params, std::size_t snap) {
  Dataset d;
  d.lines = std::move(lines);
  d.manifest.kind = kind;
  d.manifest.parameters = std::move(params);
  d.manifest.count = d.lines.size();
  d.manifest.snapshot_size = snap;
  d.manifest.sha256 = sha256_hex(d.bytes());
  return d;
}

inline nlohmann::json example_goal(const GoalSpec& g) { return goal_to_json(g, false, false); }

}  // namespace refinement_detail

enum class SftForm { pairs, transcripts };

// (prompt, final goal) pairs from human-clarified records, one per prompt
// (latest record wins), ordered by prompt hash. The transcript form adds the
// clarification exchange as alternating turns.
inline Dataset export_sft(const RecordStore::Snapshot& snap, const ExportFilter& filter = {},
                          SftForm form = SftForm::pairs) {
  using namespace refinement_detail;
  std::map<std::string, const InteractionRecord*> latest;
  for (const auto& r : snap) {
    if (r->label != LabelSource::human_clarified || !filter.admits(*r, r->final_report.global)) continue;
    auto& slot = latest[sha256_hex(r->prompt)];
    if (!slot || slot->seq < r->seq) slot = r.get();
  }
  if (latest.empty()) throw EmptyExportError("no human_clarified records match the filter");
  std::vector<std::string> lines;
  for (const auto& [hash, r] : latest) {
    if (filter.limit && lines.size() >= *filter.limit) break;
    nlohmann::json line = {{"prompt", r->prompt}, {"goal", example_goal(r->final_goal)}, {"seq", r->seq}};
    if (form == SftForm::transcripts) {
      nlohmann::json turns = nlohmann::json::array({{{"role", "user"}, {"text", r->prompt}}});
      for (const auto& c : r->clarifications) {
        turns.push_back({{"role", "system"}, {"text", c.question}});
        turns.push_back({{"role", "user"}, {"text", c.answer}});
      }
      line["turns"] = std::move(turns);
    }
    lines.push_back(line.dump());
  }
  auto params = filter_params(filter);
  params["form"] = form == SftForm::pairs ? "pairs" : "transcripts";
  return finish(DatasetKind::sft, std::move(lines), std::move(params), snap.size());
}

// High- vs low-confidence triples within a template class. Positives are
// verified and correct; negatives are incorrect or below `tau`, and never a
// correct record at or above `tau`.
inline Dataset export_contrastive(const RecordStore::Snapshot& snap, double gap, double tau) {
  using namespace refinement_detail;
  std::map<std::string, std::vector<const InteractionRecord*>> pos, neg;
  for (const auto& r : snap) {
    double c = r->initial_report.global;
    bool correct = r->initial_correct();
    if (r->verified && correct) pos[r->template_class].push_back(r.get());
    if (!correct || c < tau) neg[r->template_class].push_back(r.get());
  }
  std::vector<std::string> lines;
  for (auto& [cls, negatives] : neg) {
    auto it = pos.find(cls);
    if (it == pos.end()) continue;
    auto& positives = it->second;
    std::stable_sort(positives.begin(), positives.end(), [](auto* a, auto* b) {
      return a->initial_report.global != b->initial_report.global
                 ? a->initial_report.global > b->initial_report.global
                 : a->seq < b->seq;
    });
    for (const auto* n : negatives) {
      const InteractionRecord* p = nullptr;
      for (const auto* cand : positives)
        if (cand != n) {
          p = cand;
          break;
        }
      if (!p) continue;
      double measured = p->initial_report.global - n->initial_report.global;
      if (measured < gap) continue;
      lines.push_back(nlohmann::json{{"prompt", n->prompt},
                                     {"template_class", cls},
                                     {"gap", measured},
                                     {"positive",
                                      {{"seq", p->seq},
                                       {"prompt", p->prompt},
                                       {"goal", example_goal(p->initial_goal)},
                                       {"confidence", p->initial_report.global}}},
                                     {"negative",
                                      {{"seq", n->seq},
                                       {"prompt", n->prompt},
                                       {"goal", example_goal(n->initial_goal)},
                                       {"confidence", n->initial_report.global}}}}
                          .dump());
    }
  }
  return finish(DatasetKind::contrastive, std::move(lines), {{"gap", gap}, {"tau", tau}}, snap.size());
}

// Pseudo-labels: unlabeled sessions at or above `floor` whose plan verified.
inline Dataset export_self_train(const RecordStore::Snapshot& snap, double floor) {
  using namespace refinement_detail;
  if (!(floor > 0.0 && floor < 1.0)) throw std::invalid_argument("floor must lie in (0, 1)");
  std::vector<std::string> lines;
  for (const auto& r : snap) {
    if (r->label != LabelSource::unlabeled || !r->verified) continue;
    double c = r->initial_report.global;
    if (c < floor) continue;
    lines.push_back(nlohmann::json{{"prompt", r->prompt},
                                   {"goal", example_goal(r->initial_goal)},
                                   {"label", to_string(LabelSource::pseudo)},
                                   {"confidence", c},
                                   {"seq", r->seq}}
                        .dump());
  }
  return finish(DatasetKind::self_train, std::move(lines), {{"floor", floor}}, snap.size());
}

// 1 for a clean pass, 0.5 for a pass after clarification, 0 otherwise.
inline double reward_of(const InteractionRecord& r) {
  if (!r.verified) return 0.0;
  return r.rounds == 0 && r.clarifications.empty() ? 1.0 : 0.5;
}

inline Dataset export_reward(const RecordStore::Snapshot& snap) {
  using namespace refinement_detail;
  std::vector<std::string> lines;
  for (const auto& r : snap)
    lines.push_back(nlohmann::json{{"prompt", r->prompt},
                                   {"goal", example_goal(r->final_goal)},
                                   {"reward", reward_of(*r)},
                                   {"seq", r->seq}}
                        .dump());
  return finish(DatasetKind::reward, std::move(lines), nlohmann::json::object(), snap.size());
}

// Writes `<path>` and `<path>.manifest.json`.
inline void write_dataset(const Dataset& d, const std::string& path) {
  std::ofstream data(path, std::ios::binary);
  if (!data) throw std::runtime_error("cannot write " + path);
  data << d.bytes();
  std::ofstream manifest(path + ".manifest.json", std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write " + path + ".manifest.json");
  manifest << d.manifest.render();
}

inline bool manifest_matches(const std::string& bytes, const nlohmann::json& manifest) {
  std::size_t lines = static_cast<std::size_t>(std::count(bytes.begin(), bytes.end(), '\n'));
  return manifest.at("sha256").get<std::string>() == sha256_hex(bytes) &&
         manifest.at("count").get<std::size_t>() == lines;
}

}  // namespace vll
