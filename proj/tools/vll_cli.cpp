// vll: command-line front end (repl, plan, verify-plan, export-dataset, eval, serve).
// Exit codes: 0 success, 1 domain failure, 2 usage error.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "vll/refinement.hpp"
#include "vll/service/config.hpp"
#include "vll/service/eval.hpp"
#include "vll/service/http.hpp"
#include "vll/service/session_service.hpp"

namespace {

using namespace vll;

struct DomainFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GoalFlags {
  std::string from, to, objective = "fuel";
  std::optional<double> deadline, max_fuel, max_risk;
  bool weather = false;

  void add(CLI::App* app, bool endpoints) {
    if (endpoints) {
      app->add_option("--from", from, "origin code")->required();
      app->add_option("--to", to, "destination code")->required();
      app->add_option("--objective", objective, "fuel|time|risk")->capture_default_str();
    }
    app->add_option("--deadline", deadline, "deadline in minutes");
    app->add_option("--max-fuel", max_fuel, "fuel budget");
    app->add_option("--max-risk", max_risk, "risk budget");
    app->add_flag("--weather", weather, "respect weather windows");
  }

  GoalSpec goal(const std::string& o, const std::string& d, Objective obj) const {
    GoalSpec g;
    g.intent = Intent::PlanRequest;
    auto put = [&](SlotName n, SlotValue v) { g.set(Slot{n, std::move(v), 1.0, Provenance::clarified}); };
    put(SlotName::origin, LocationCode{o});
    put(SlotName::destination, LocationCode{d});
    put(SlotName::objective, obj);
    if (deadline) put(SlotName::deadline, Minutes{*deadline});
    if (max_fuel) put(SlotName::max_fuel, Units{*max_fuel});
    if (max_risk) put(SlotName::max_risk, Units{*max_risk});
    put(SlotName::consider_weather, weather);
    return g;
  }
};

Objective objective_flag(const std::string& s) {
  std::string l = text::lower(s);
  if (l == "fuel" || l == "cost" || l == "min_fuel_cost") return Objective::min_fuel_cost;
  if (l == "time" || l == "min_time") return Objective::min_time;
  if (l == "risk" || l == "min_risk") return Objective::min_risk;
  throw CLI::ValidationError("--objective", "expected fuel, time or risk");
}

int cmd_plan(const std::string& db_path, const GoalFlags& flags) {
  auto db = load_database(db_path);
  GoalSpec g = flags.goal(text::upper(flags.from), text::upper(flags.to), objective_flag(flags.objective));
  auto v = validate(g);
  if (!v.ok()) throw DomainFailure("goal does not validate");
  auto r = solve(g, db);
  if (auto* inf = std::get_if<Infeasible>(&r)) throw DomainFailure("infeasible: " + inf->reason);
  const Plan& p = std::get<Plan>(r);
  auto report = verify(p, g, db);
  std::cout << render_plan(p) << verdict_to_feedback(report) << "\n";
  return report.overall ? 0 : 1;
}

int cmd_verify(const std::string& db_path, const std::string& plan_path, const GoalFlags& flags) {
  auto db = load_database(db_path);
  Plan p = parse_plan(read_file(plan_path));
  auto path = p.path();
  std::string o = path.empty() ? "" : path.front();
  std::string d = path.empty() ? "" : path.back();
  if (path.empty()) throw DomainFailure("plan has no legs");
  auto report = verify(p, flags.goal(o, d, p.objective), db);
  std::cout << verdict_to_feedback(report) << "\n";
  return report.overall ? 0 : 1;
}

int cmd_export(const std::string& records, const std::string& kind_name, const std::string& out, double gap,
               double tau, double floor, const ExportFilter& filter, bool transcripts) {
  auto kind = parse_dataset_kind(kind_name);
  if (!kind) throw CLI::ValidationError("--kind", "expected sft, contrastive, self_train or reward");
  RecordStore store;
  store.load_jsonl(read_file(records));
  auto snap = store.snapshot();
  Dataset d;
  switch (*kind) {
    case DatasetKind::sft: d = export_sft(snap, filter, transcripts ? SftForm::transcripts : SftForm::pairs); break;
    case DatasetKind::contrastive: d = export_contrastive(snap, gap, tau); break;
    case DatasetKind::self_train: d = export_self_train(snap, floor); break;
    case DatasetKind::reward: d = export_reward(snap); break;
  }
  write_dataset(d, out);
  std::cout << d.manifest.render();
  return 0;
}

struct EvalFlags {
  std::string sweep = "0.5:0.95:0.05";
  std::string backend = "scripted";
  std::uint64_t seed = 42;
  std::string db = "data/six_node.db";
  std::size_t suite_size = 200;
  std::uint64_t suite_seed = 7;
  double error_rate = 0.3;
  double coupling = 1.0;
  int max_rounds = 3;
  std::string head;
  std::string json_out;
};

int cmd_eval(const EvalFlags& f) {
  if (f.backend != "scripted") throw CLI::ValidationError("--backend", "eval runs against the scripted backend");
  auto db = load_database(f.db);
  EvalConfig cfg;
  cfg.db = &db;
  cfg.backend.profile.error_rate = f.error_rate;
  cfg.backend.profile.coupling = f.coupling;
  cfg.backend.seed = f.seed;
  cfg.seeds = {f.seed};
  cfg.sweep = parse_sweep(f.sweep);
  cfg.max_rounds = f.max_rounds;
  std::optional<CalibrationHead> head;
  if (!f.head.empty()) head = load_head(read_file(f.head));
  cfg.head = head ? &*head : nullptr;
  auto result = run_eval(cfg, generate_suite(db, f.suite_size, f.suite_seed));
  std::cout << render_eval_table(result) << "\n" << render_eval_measured(result);
  if (!f.json_out.empty()) {
    std::ofstream out(f.json_out, std::ios::binary);
    out << eval_to_json(result).dump(2) << "\n";
  }
  return 0;
}

struct Runtime {
  ServiceConfig config;
  LogisticsDatabase db;
  std::unique_ptr<SessionService> service;
};

std::unique_ptr<Runtime> start_runtime(const std::string& config_path) {
  auto rt = std::make_unique<Runtime>();
  try {
    rt->config = load_config(config_path);
    rt->config.check();
  } catch (const ConfigError& e) {
    throw CLI::ValidationError("--config", e.what());
  }
  rt->db = load_database(rt->config.database);
  std::optional<CalibrationHead> head;
  if (!rt->config.head.empty()) head = load_head(read_file(rt->config.head));
  SessionServiceOptions opts;
  opts.max_rounds = rt->config.max_rounds;
  opts.cache_size = rt->config.cache_size;
  opts.transcript_dir = rt->config.transcript_dir;
  opts.records = rt->config.records;
  rt->service = std::make_unique<SessionService>(rt->db, make_backend(rt->config.backend), rt->config.threshold.make(),
                                                 head, opts);
  if (!rt->config.records.empty() && std::filesystem::exists(rt->config.records))
    rt->service->records().load_jsonl(read_file(rt->config.records));
  return rt;
}

int cmd_repl(const std::string& config_path) {
  auto rt = start_runtime(config_path);
  auto& svc = *rt->service;
  auto id = nlohmann::json::parse(svc.create_session().body).at("id").get<std::string>();
  int turn = 0;
  std::size_t shown = 0;
  auto print_new = [&] {
    auto s = *svc.session(id);
    for (; shown < s.turns.size(); ++shown)
      if (s.turns[shown].role == Turn::Role::system) std::cout << "system> " << s.turns[shown].text << "\n";
    return s;
  };
  std::string line;
  std::cout << "user> " << std::flush;
  while (std::getline(std::cin, line)) {
    if (text::trim(line).empty()) {
      std::cout << "user> " << std::flush;
      continue;
    }
    auto s = *svc.session(id);
    ServiceResponse r;
    if (s.state == SessionState::AwaitingClarification) {
      std::vector<Answer> answers;
      auto parts = text::split(line, ';');
      for (std::size_t i = 0; i < s.pending.size() && i < parts.size(); ++i)
        answers.push_back({s.pending[i].slot, std::string(text::trim(parts[i]))});
      r = svc.post_clarification(id, "t" + std::to_string(++turn), answers);
    } else {
      r = svc.post_message(id, "t" + std::to_string(++turn), line);
    }
    if (r.status != 200) std::cerr << "error " << r.status << ": " << r.body << "\n";
    s = print_new();
    if (s.state == SessionState::AwaitingClarification && s.pending.size() > 1)
      std::cout << "(answer the " << s.pending.size() << " questions in order, separated by ';')\n";
    std::cout << "user> " << std::flush;
  }
  return 0;
}

httplib::Server* g_server = nullptr;

int cmd_serve(const std::string& config_path) {
  auto rt = start_runtime(config_path);
  httplib::Server server;
  mount_routes(server, *rt->service);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "listening on " << rt->config.host << ":" << rt->config.port << "\n";
  if (!server.listen(rt->config.host, rt->config.port)) throw DomainFailure("cannot listen on the configured address");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware logistics request interpreter and planner"};
  app.require_subcommand(1);

  std::string config = "vll.conf";
  std::string db = "data/fig3.db";

  auto* repl = app.add_subcommand("repl", "interactive clarification loop");
  repl->add_option("--config", config, "service configuration file")->capture_default_str();

  GoalFlags plan_flags;
  auto* plan = app.add_subcommand("plan", "solve and verify a route request");
  plan->add_option("--db", db, "database file")->capture_default_str();
  plan_flags.add(plan, true);

  GoalFlags verify_flags;
  std::string plan_file;
  auto* verify_cmd = app.add_subcommand("verify-plan", "check a plan file against the database");
  verify_cmd->add_option("plan", plan_file, "plan file")->required();
  verify_cmd->add_option("--db", db, "database file")->capture_default_str();
  verify_flags.add(verify_cmd, false);

  std::string records, kind, out;
  double gap = 0.4, tau = 0.85, floor = 0.8;
  ExportFilter filter;
  auto* exp = app.add_subcommand("export-dataset", "export a refinement dataset from a record log");
  exp->add_option("--records", records, "interaction record log (JSONL)")->required();
  exp->add_option("--kind", kind, "sft|contrastive|self_train|reward")->required();
  exp->add_option("--out", out, "dataset path; the manifest goes to <out>.manifest.json")->required();
  exp->add_option("--gap", gap, "contrastive confidence gap")->capture_default_str();
  exp->add_option("--tau", tau, "contrastive acceptance threshold")->capture_default_str();
  exp->add_option("--floor", floor, "self-training confidence floor")->capture_default_str();
  exp->add_option("--min-confidence", filter.min_confidence, "sft filter");
  exp->add_option("--max-confidence", filter.max_confidence, "sft filter");
  exp->add_option("--limit", filter.limit, "sft record limit");
  bool transcripts = false;
  exp->add_flag("--transcripts", transcripts, "sft: include clarification turns");

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "threshold sweep over a labeled prompt suite");
  eval->add_option("--sweep", ef.sweep, "start:stop:step")->capture_default_str();
  eval->add_option("--backend", ef.backend, "interpreter backend")->capture_default_str();
  eval->add_option("--seed", ef.seed, "backend seed")->capture_default_str();
  eval->add_option("--db", ef.db, "database file")->capture_default_str();
  eval->add_option("--suite-size", ef.suite_size, "prompts in the suite")->capture_default_str();
  eval->add_option("--suite-seed", ef.suite_seed, "suite generator seed")->capture_default_str();
  eval->add_option("--error-rate", ef.error_rate, "scripted slot error rate")->capture_default_str();
  eval->add_option("--coupling", ef.coupling, "scripted trace coupling")->capture_default_str();
  eval->add_option("--max-rounds", ef.max_rounds, "clarification bound")->capture_default_str();
  eval->add_option("--head", ef.head, "calibration head file");
  eval->add_option("--json", ef.json_out, "write machine-readable results here");

  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  serve->add_option("--config", config, "service configuration file")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*repl) return cmd_repl(config);
    if (*plan) return cmd_plan(db, plan_flags);
    if (*verify_cmd) return cmd_verify(db, plan_file, verify_flags);
    if (*exp) return cmd_export(records, kind, out, gap, tau, floor, filter, transcripts);
    if (*eval) return cmd_eval(ef);
    if (*serve) return cmd_serve(config);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
