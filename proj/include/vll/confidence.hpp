#pragma once

// Confidence estimation: token entropy, per-field heuristic scores, a logistic
// calibration head trained by full-batch gradient descent, and the
// accept/clarify decision against a fixed or adaptive threshold.

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vll/goal_spec.hpp"
#include "vll/interpreter.hpp"
#include "vll/text.hpp"

namespace vll {

struct ConfidenceError : std::logic_error {
  using std::logic_error::logic_error;
};

// Shannon entropy (nats) of the renormalized distribution given by `logprobs`.
inline double token_entropy(std::span<const double> logprobs) {
  if (logprobs.empty()) throw std::invalid_argument("token_entropy: no alternatives");
  double top = *std::max_element(logprobs.begin(), logprobs.end());
  double z = 0.0;
  for (double l : logprobs) z += std::exp(l - top);
  double log_z = top + std::log(z);
  double h = 0.0;
  for (double l : logprobs) {
    double lp = l - log_z;
    double p = std::exp(lp);
    if (p > 0.0) h -= p * lp;
  }
  return std::max(0.0, h);
}

inline double token_entropy(const TraceToken& t) {
  std::vector<double> lps;
  lps.reserve(t.alternatives.size());
  for (const auto& a : t.alternatives) lps.push_back(a.logprob);
  return token_entropy(lps);
}

// Geometric-mean probability of the chosen tokens: exp(mean logprob).
inline double geometric_mean_probability(std::span<const double> chosen_logprobs) {
  if (chosen_logprobs.empty()) throw ConfidenceError("no attributed tokens");
  double sum = std::accumulate(chosen_logprobs.begin(), chosen_logprobs.end(), 0.0);
  return std::exp(sum / static_cast<double>(chosen_logprobs.size()));
}

inline constexpr std::size_t kFeatureCount = 6;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "mean_logprob", "min_logprob", "mean_entropy", "max_entropy", "token_count", "degraded"};

struct FieldFeatures {
  double mean_logprob = 0.0;
  double min_logprob = 0.0;
  double mean_entropy = 0.0;
  double max_entropy = 0.0;
  double token_count = 0.0;
  bool degraded = false;

  std::array<double, kFeatureCount> vec() const {
    return {mean_logprob, min_logprob, mean_entropy, max_entropy, token_count, degraded ? 1.0 : 0.0};
  }
};

inline FieldFeatures field_features(const TokenTrace& trace, SlotName slot) {
  auto toks = trace.attributed(slot);
  if (toks.empty())
    throw ConfidenceError("slot '" + std::string(to_string(slot)) + "' has no attributed tokens");
  FieldFeatures f;
  f.min_logprob = 0.0;
  double lp_sum = 0.0, h_sum = 0.0;
  for (const auto* t : toks) {
    double h = token_entropy(*t);
    lp_sum += t->logprob;
    h_sum += h;
    f.min_logprob = std::min(f.min_logprob, t->logprob);
    f.max_entropy = std::max(f.max_entropy, h);
  }
  double n = static_cast<double>(toks.size());
  f.mean_logprob = lp_sum / n;
  f.mean_entropy = h_sum / n;
  f.token_count = n;
  f.degraded = trace.degraded;
  return f;
}

// Raw heuristic score for one filled slot.
inline double field_confidence(const TokenTrace& trace, const Slot& slot, double default_prior = 0.9) {
  switch (slot.provenance) {
    case Provenance::clarified: return 1.0;
    case Provenance::defaulted: return default_prior;
    case Provenance::model: break;
  }
  auto toks = trace.attributed(slot.name);
  if (toks.empty())
    throw ConfidenceError("model slot '" + std::string(to_string(slot.name)) + "' has no attributed tokens");
  std::vector<double> lps;
  for (const auto* t : toks) lps.push_back(t->logprob);
  return geometric_mean_probability(lps);
}

// ---------------------------------------------------------------------------
// Calibration head

struct CalibrationHead {
  std::array<double, kFeatureCount> weights{};
  double bias = 0.0;
  std::size_t trained_on = 0;
  std::string version = "untrained";
  bool operator==(const CalibrationHead&) const = default;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

inline double calibrate(const CalibrationHead& head, const FieldFeatures& features) {
  auto phi = features.vec();
  double z = head.bias;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!std::isfinite(phi[i])) throw std::domain_error(std::string("non-finite feature ") + kFeatureNames[i]);
    z += head.weights[i] * phi[i];
  }
  if (!std::isfinite(z)) throw std::domain_error("non-finite calibration logit");
  // keep strictly inside (0,1) where the logistic saturates in double precision
  return std::clamp(sigmoid(z), std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

struct LabeledExample {
  FieldFeatures features;
  bool correct = false;
};

// Parameters are the feature weights followed by the bias.
using HeadParams = std::array<double, kFeatureCount + 1>;

struct LossAndGradient {
  double loss = 0.0;
  HeadParams gradient{};
};

// Mean binary cross-entropy and its analytic gradient.
inline LossAndGradient cross_entropy(const HeadParams& params, std::span<const LabeledExample> examples) {
  LossAndGradient out;
  if (examples.empty()) return out;
  for (const auto& ex : examples) {
    auto phi = ex.features.vec();
    double z = params[kFeatureCount];
    for (std::size_t i = 0; i < kFeatureCount; ++i) z += params[i] * phi[i];
    double y = ex.correct ? 1.0 : 0.0;
    // log(1 + e^z) - y z, written to stay finite for large |z|.
    double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    out.loss += softplus - y * z;
    double err = sigmoid(z) - y;
    for (std::size_t i = 0; i < kFeatureCount; ++i) out.gradient[i] += err * phi[i];
    out.gradient[kFeatureCount] += err;
  }
  double n = static_cast<double>(examples.size());
  out.loss /= n;
  for (auto& g : out.gradient) g /= n;
  return out;
}

struct TrainResult {
  CalibrationHead head;
  double final_loss = 0.0;
};

inline TrainResult train_head(std::span<const LabeledExample> examples, int epochs = 3000, double rate = 0.5) {
  if (examples.size() < 10) throw std::invalid_argument("train_head: need at least 10 examples");
  std::size_t positives = 0;
  for (const auto& ex : examples) positives += ex.correct ? 1 : 0;
  if (positives == 0 || positives == examples.size()) throw std::invalid_argument("degenerate labels");
  if (epochs < 0 || !(rate > 0.0)) throw std::invalid_argument("train_head: bad epochs or rate");

  HeadParams params{};
  for (int e = 0; e < epochs; ++e) {
    auto lg = cross_entropy(params, examples);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= rate * lg.gradient[i];
  }
  TrainResult r;
  std::copy_n(params.begin(), kFeatureCount, r.head.weights.begin());
  r.head.bias = params[kFeatureCount];
  r.head.trained_on = examples.size();
  r.final_loss = cross_entropy(params, examples).loss;
  std::ostringstream v;
  v << "gd-" << examples.size() << "x" << epochs;
  r.head.version = v.str();
  return r;
}

// Key-value text: one `name = value` per line.
inline std::string save_head(const CalibrationHead& head) {
  std::ostringstream out;
  out.precision(17);
  out << "version = " << head.version << "\n";
  out << "trained_on = " << head.trained_on << "\n";
  out << "bias = " << head.bias << "\n";
  for (std::size_t i = 0; i < kFeatureCount; ++i) out << kFeatureNames[i] << " = " << head.weights[i] << "\n";
  return out.str();
}

inline CalibrationHead load_head(std::string_view body) {
  CalibrationHead head;
  std::size_t lineno = 0;
  for (const auto& raw : text::split(body, '\n')) {
    ++lineno;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw std::runtime_error("head file line " + std::to_string(lineno) + ": missing '='");
    std::string key(text::trim(line.substr(0, eq)));
    std::string val(text::trim(line.substr(eq + 1)));
    if (key == "version") {
      head.version = val;
      continue;
    }
    auto num = text::parse_number(val);
    if (!num) throw std::runtime_error("head file line " + std::to_string(lineno) + ": bad number");
    if (key == "trained_on") {
      head.trained_on = static_cast<std::size_t>(*num);
    } else if (key == "bias") {
      head.bias = *num;
    } else {
      auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), key);
      if (it == kFeatureNames.end()) throw std::runtime_error("head file: unknown feature '" + key + "'");
      head.weights[static_cast<std::size_t>(it - kFeatureNames.begin())] = *num;
    }
  }
  return head;
}

// ---------------------------------------------------------------------------
// Threshold policy

enum class ThresholdMode { fixed, adaptive };

// Fixed tau, or the (1 - target_precision) quantile of calibrated scores of
// recently confirmed-correct slots over a window of labeled outcomes.
class ThresholdPolicy {
 public:
  static constexpr double kAdaptiveMin = 0.5;
  static constexpr double kAdaptiveMax = 0.99;

  static ThresholdPolicy fixed(double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0,1]");
    ThresholdPolicy p;
    p.mode_ = ThresholdMode::fixed;
    p.tau0_ = tau;
    return p;
  }

  static ThresholdPolicy adaptive(double target_precision = 0.9, std::size_t window = 200, double fallback = 0.85) {
    if (!(target_precision > 0.0 && target_precision < 1.0)) throw std::invalid_argument("precision must lie in (0,1)");
    if (window == 0) throw std::invalid_argument("window must be positive");
    ThresholdPolicy p = fixed(fallback);
    p.mode_ = ThresholdMode::adaptive;
    p.rho_ = target_precision;
    p.window_ = window;
    return p;
  }

  ThresholdPolicy() = default;
  ThresholdPolicy(const ThresholdPolicy& o) { copy_from(o); }
  ThresholdPolicy& operator=(const ThresholdPolicy& o) {
    if (this != &o) copy_from(o);
    return *this;
  }

  ThresholdMode mode() const { return mode_; }
  double fallback() const { return tau0_; }
  double target_precision() const { return rho_; }
  std::size_t window() const { return window_; }

  double current() const {
    std::lock_guard lock(mu_);
    return current_locked();
  }

  // Record a ground-truth outcome for a scored slot. No-op in fixed mode.
  void observe(double score, bool correct) {
    if (mode_ != ThresholdMode::adaptive) return;
    std::lock_guard lock(mu_);
    history_.emplace_back(score, correct);
    while (history_.size() > window_) history_.pop_front();
  }

  std::size_t labels() const {
    std::lock_guard lock(mu_);
    return history_.size();
  }

 private:
  double current_locked() const {
    if (mode_ == ThresholdMode::fixed) return tau0_;
    if (history_.size() < std::max<std::size_t>(1, window_ / 4)) return tau0_;
    std::vector<double> good;
    for (const auto& [s, c] : history_)
      if (c) good.push_back(s);
    if (good.empty()) return kAdaptiveMax;
    std::sort(good.begin(), good.end());
    double q = 1.0 - rho_;
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(good.size())));
    std::size_t idx = rank == 0 ? 0 : rank - 1;
    return std::clamp(good[std::min(idx, good.size() - 1)], kAdaptiveMin, kAdaptiveMax);
  }

  void copy_from(const ThresholdPolicy& o) {
    std::scoped_lock lock(mu_, o.mu_);
    mode_ = o.mode_;
    tau0_ = o.tau0_;
    rho_ = o.rho_;
    window_ = o.window_;
    history_ = o.history_;
  }

  ThresholdMode mode_ = ThresholdMode::fixed;
  double tau0_ = 0.85;
  double rho_ = 0.9;
  std::size_t window_ = 200;
  mutable std::mutex mu_;
  std::deque<std::pair<double, bool>> history_;
};

// ---------------------------------------------------------------------------
// Decision

enum class Decision { Accept, Clarify };

inline std::string_view to_string(Decision d) { return d == Decision::Accept ? "Accept" : "Clarify"; }

struct SlotScore {
  SlotName slot = SlotName::subjects;
  double raw = 0.0;
  double calibrated = 0.0;
  bool present = true;
  bool operator==(const SlotScore&) const = default;
};

struct ConfidenceReport {
  std::vector<SlotScore> slots;  // essential slots, vocabulary order
  double global = 0.0;           // product of essential calibrated scores
  double threshold = 0.0;
  Decision decision = Decision::Clarify;
  std::vector<SlotName> clarify;  // sub-threshold slots, lowest score first
  bool intent_unresolved = false;
  bool operator==(const ConfidenceReport&) const = default;
};

// Fills global/decision/clarify from the per-slot scores and tau.
inline void apply_threshold(ConfidenceReport& report, double tau) {
  report.threshold = tau;
  report.global = 1.0;
  for (const auto& s : report.slots) report.global *= s.calibrated;
  if (report.intent_unresolved) report.global = 0.0;

  std::vector<const SlotScore*> low;
  for (const auto& s : report.slots)
    if (s.calibrated < tau) low.push_back(&s);
  std::stable_sort(low.begin(), low.end(),
                   [](const SlotScore* a, const SlotScore* b) { return a->calibrated < b->calibrated; });
  report.clarify.clear();
  for (const auto* s : low) report.clarify.push_back(s->slot);
  report.decision = (!report.intent_unresolved && report.clarify.empty()) ? Decision::Accept : Decision::Clarify;
}

struct DecideOptions {
  EssentialSlotPolicy essential = EssentialSlotPolicy::standard();
  double default_prior = 0.9;
};

// Scores every essential slot (missing ones score 0) and applies the policy's
// current threshold. `head` may be null, in which case calibrated = raw.
inline ConfidenceReport decide(const GoalSpec& goal, const TokenTrace& trace, const CalibrationHead* head,
                               const ThresholdPolicy& policy, const DecideOptions& opts = {}) {
  ConfidenceReport report;
  report.intent_unresolved = goal.intent == Intent::Unknown;
  for (auto name : opts.essential.essential_for(goal)) {
    SlotScore s{name, 0.0, 0.0, false};
    if (const Slot* slot = goal.find(name)) {
      s.present = true;
      s.raw = field_confidence(trace, *slot, opts.default_prior);
      if (slot->provenance == Provenance::model && head) s.calibrated = calibrate(*head, field_features(trace, name));
      else s.calibrated = s.raw;
    }
    report.slots.push_back(s);
  }
  apply_threshold(report, policy.current());
  return report;
}

// Writes calibrated confidences into the goal's model slots (every filled slot
// gets a score in [0,1]).
inline void attach_confidences(GoalSpec& goal, const TokenTrace& trace, const CalibrationHead* head,
                               double default_prior = 0.9) {
  for (auto& [name, slot] : goal.slots) {
    if (slot.provenance == Provenance::model && trace.attributed(name).empty()) {
      slot.confidence = 0.0;
      continue;
    }
    double raw = field_confidence(trace, slot, default_prior);
    if (slot.provenance == Provenance::model && head) raw = calibrate(*head, field_features(trace, name));
    slot.confidence = std::clamp(raw, 0.0, 1.0);
  }
}

}  // namespace vll
