#pragma once

// Seeded interaction corpora: run the clarification loop over a labeled
// suite with an oracle user and append every finished session to a store,
// with per-slot ground truth attached.

#include <vector>

#include "vll/refinement.hpp"
#include "vll/service/eval.hpp"
#include "vll/suite.hpp"

namespace vll {

struct CorpusOptions {
  NoiseProfile profile;
  std::uint64_t seed = 0;
  double tau = 0.0;
  const CalibrationHead* head = nullptr;
  int max_rounds = 3;
};

inline void fill_store(RecordStore& store, const LogisticsDatabase& db, const std::vector<LabeledPrompt>& suite,
                       const CorpusOptions& opts) {
  ThresholdPolicy policy = ThresholdPolicy::fixed(opts.tau);
  DialogueContext ctx;
  ctx.db = &db;
  ctx.head = opts.head;
  ctx.policy = &policy;
  std::int64_t tick = 0;
  ctx.clock = [&tick] { return tick += 1000; };
  ScriptedBackend backend(opts.profile, opts.seed);
  DialogueDriver driver(ctx, backend, nullptr);
  for (const auto& lp : suite) {
    DialogueSession s;
    s.max_rounds = opts.max_rounds;
    s = driver.submit(std::move(s), UserPrompt{lp.prompt});
    while (s.state == SessionState::AwaitingClarification) {
      std::size_t pending = s.pending.size();
      s = driver.submit(std::move(s), oracle_answer(s, lp.truth));
      if (s.state == SessionState::AwaitingClarification && s.pending.size() == pending) break;
    }
    if (s.state != SessionState::Delivered && s.state != SessionState::Failed) continue;
    auto r = record_from_session(s, db);
    r.slot_correct = slot_correctness(s.initial_goal, lp.truth);
    store.append(std::move(r));
  }
}

// The head every seeded corpus uses: trained on `prompts` suite prompts.
inline CalibrationHead corpus_head(const LogisticsDatabase& db, const NoiseProfile& profile, std::size_t prompts,
                                   std::uint64_t seed) {
  auto suite = generate_suite(db, prompts, seed);
  auto ex = collect_examples(suite, db, profile, seed + 10);
  return train_head(ex).head;
}

}  // namespace vll
