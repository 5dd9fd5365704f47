#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "oracles/brute_force.hpp"
#include "vll/planner.hpp"
#include "vll/verifier.hpp"

using namespace vll;
using fixtures::GoalBuilder;

static GoalSpec goal_for(const std::string& o, const std::string& d, Objective obj, const oracle::Budget& b) {
  GoalBuilder g;
  g.route(o, d, obj).weather(b.weather);
  if (b.deadline) g.deadline(*b.deadline);
  if (b.max_fuel) g.max_fuel(*b.max_fuel);
  if (b.max_risk) g.max_risk(*b.max_risk);
  return g.done();
}

// none / loose / tight levels for each budget, taken from the unconstrained route totals.
static std::vector<oracle::Budget> budget_grid(const LogisticsDatabase& db, const std::string& o,
                                               const std::string& d) {
  auto routes = oracle::all_routes(db, o, d, {});
  auto levels = [&](auto field) {
    std::vector<std::optional<double>> out{std::nullopt};
    std::vector<double> v;
    for (const auto& r : routes) v.push_back(field(r));
    std::sort(v.begin(), v.end());
    if (!v.empty()) {
      out.push_back(v[v.size() / 4]);
      out.push_back(v[(v.size() * 3) / 5]);
    }
    return out;
  };
  auto dl = levels([](const oracle::Route& r) { return r.time; });
  auto fu = levels([](const oracle::Route& r) { return r.fuel; });
  auto ri = levels([](const oracle::Route& r) { return r.risk; });
  std::vector<oracle::Budget> grid;
  for (auto a : dl)
    for (auto b : fu)
      for (auto c : ri)
        for (bool w : {false, true}) grid.push_back({a, b, c, w});
  return grid;
}

struct Tally {
  int compared = 0, feasible = 0;
};

static void check_against_oracle(const LogisticsDatabase& db, Tally& t) {
  for (const auto& lo : db.locations())
    for (const auto& ld : db.locations()) {
      if (lo.code == ld.code) continue;
      for (const auto& b : budget_grid(db, lo.code, ld.code))
        for (Objective obj : kAllObjectives) {
          auto g = goal_for(lo.code, ld.code, obj, b);
          auto got = solve(g, db);
          auto want = oracle::best(db, lo.code, ld.code, obj, b);
          ++t.compared;
          ASSERT_EQ(std::holds_alternative<Plan>(got), want.has_value())
              << lo.code << "->" << ld.code << " " << to_string(obj);
          if (!want) continue;
          ++t.feasible;
          const auto& p = std::get<Plan>(got);
          ASSERT_EQ(p.objective_value, oracle::value(*want, obj));
          ASSERT_EQ(p.path(), want->codes);
          ASSERT_TRUE(verify(p, g, db).overall) << verdict_to_feedback(verify(p, g, db));
        }
    }
}

TEST(Solve, Fig3DelDxb) {
  auto r = solve(GoalBuilder().route("DEL", "DXB").done(), fixtures::fig3());
  auto& p = std::get<Plan>(r);
  ASSERT_EQ(p.legs.size(), 1u);
  EXPECT_EQ(p.totals.fuel, 500);
  EXPECT_EQ(p.totals.risk, 100);
  EXPECT_EQ(p.totals.minutes, 210);
  EXPECT_EQ(p.legs[0], (Leg{"DEL", "DXB", 0, 210}));
  EXPECT_EQ(p.db_version, fixtures::fig3().version());
}

TEST(Solve, SixNodeHandChecked) {
  const auto& db = fixtures::six_node();
  auto path_of = [&](Objective o, bool weather) {
    return std::get<Plan>(solve(GoalBuilder().route("DEL", "LHR", o).weather(weather).done(), db)).path();
  };
  using V = std::vector<std::string>;
  EXPECT_EQ(path_of(Objective::min_fuel_cost, false), (V{"DEL", "DOH", "IST", "LHR"}));  // 1150
  EXPECT_EQ(path_of(Objective::min_time, false), (V{"DEL", "FRA", "LHR"}));              // 440 min, risk 410
  EXPECT_EQ(path_of(Objective::min_risk, false), (V{"DEL", "DXB", "LHR"}));              // risk 160
  // Istanbul closes 250-400; the cheap corridor lands there at 360.
  EXPECT_EQ(path_of(Objective::min_fuel_cost, true), (V{"DEL", "DOH", "FRA", "LHR"}));  // 1300
}

TEST(Solve, Trivial) {
  auto r = solve(GoalBuilder().route("DEL", "DEL").done(), fixtures::fig3());
  auto& p = std::get<Plan>(r);
  EXPECT_TRUE(p.legs.empty());
  EXPECT_EQ(p.totals, PlanTotals{});
}

TEST(Solve, InfeasibleReasons) {
  const auto& db = fixtures::six_node();
  auto reason = [&](const GoalSpec& g) { return std::get<Infeasible>(solve(g, db)).reason; };
  EXPECT_EQ(reason(GoalBuilder().route("DEL", "LHR").deadline(100).done()), "constraint deadline cannot be met");
  EXPECT_EQ(reason(GoalBuilder().route("DEL", "LHR").max_fuel(1000).done()), "constraint max_fuel cannot be met");
  EXPECT_EQ(reason(GoalBuilder().route("DEL", "LHR").max_risk(100).done()), "constraint max_risk cannot be met");
  // Dropping either budget restores feasibility, so both are binding.
  EXPECT_EQ(reason(GoalBuilder().route("DEL", "LHR").max_fuel(1150).deadline(440).done()),
            "constraint deadline, max_fuel cannot be met");
  // Every pair conflicts, so no single relaxation helps.
  EXPECT_EQ(reason(GoalBuilder().route("DEL", "LHR").max_fuel(1150).deadline(440).max_risk(160).done()),
            "constraints deadline, max_fuel, max_risk cannot be met together");

  auto island = LogisticsDatabase::from_records(
      {{"AAA", "a", LocationKind::airport, 0, 0, {}}, {"BBB", "b", LocationKind::airport, 0, 0, {}}}, {}, {});
  EXPECT_EQ(std::get<Infeasible>(solve(GoalBuilder().route("AAA", "BBB").done(), island)).reason, "no route");
  EXPECT_EQ(std::get<Infeasible>(solve(GoalBuilder().route("AAA", "ZZZ").done(), island)).reason,
            "unknown location ZZZ");
  EXPECT_THROW(solve(GoalSpec{}, island), std::invalid_argument);
}

TEST(Solve, NonFlyableEdgeUnused) {
  // DXB->FRA is the fastest hop out of Dubai but is marked unflyable.
  auto p = std::get<Plan>(solve(GoalBuilder().route("DXB", "FRA", Objective::min_time).done(), fixtures::six_node()));
  EXPECT_EQ(p.path(), (std::vector<std::string>{"DXB", "DOH", "FRA"}));
}

TEST(Solve, MatchesBruteForceOnFixtures) {
  Tally t;
  for (auto* db : {&fixtures::fig3(), &fixtures::six_node()}) check_against_oracle(*db, t);
  check_against_oracle(load_database(fixtures::data("eight_node.db")), t);
  EXPECT_GT(t.feasible, 1000);
}

TEST(Solve, MatchesBruteForceOnRandomGraphs) {
  std::mt19937 rng(2024);
  Tally t;
  for (int i = 0; i < 6; ++i) {
    auto db = oracle::random_db(rng, 5 + i % 4);
    check_against_oracle(db, t);
  }
  EXPECT_GT(t.feasible, 500);
}

TEST(Solve, PruningPreservesOptimum) {
  std::mt19937 rng(77);
  for (int i = 0; i < 30; ++i) {
    auto db = oracle::random_db(rng, 8, 0.45);
    const auto& locs = db.locations();
    for (int k = 0; k < 10; ++k) {
      const auto& o = locs[rng() % locs.size()].code;
      const auto& d = locs[rng() % locs.size()].code;
      for (Objective obj : kAllObjectives)
        for (bool w : {false, true}) {
          auto g = GoalBuilder().route(o, d, obj).weather(w).max_fuel(600).done();
          auto a = solve(g, db, {true});
          auto b = solve(g, db, {false});
          ASSERT_EQ(a.index(), b.index());
          if (auto* p = std::get_if<Plan>(&a)) {
            ASSERT_EQ(*p, std::get<Plan>(b));
          }
        }
    }
  }
}

TEST(Solve, Deterministic) {
  auto g = GoalBuilder().route("DEL", "LHR", Objective::min_risk).done();
  EXPECT_EQ(render_plan(std::get<Plan>(solve(g, fixtures::six_node()))),
            render_plan(std::get<Plan>(solve(g, fixtures::six_node()))));
}

TEST(Cache, HitMissAndVersionSalt) {
  SolutionCache cache(8);
  auto g = GoalBuilder().route("DEL", "LHR").done();
  auto first = solve_cached(g, fixtures::six_node(), cache);
  auto second = solve_cached(g, fixtures::six_node(), cache);
  EXPECT_FALSE(first.cache_hit);
  EXPECT_TRUE(second.cache_hit);
  EXPECT_EQ(render_plan(std::get<Plan>(first.result)), render_plan(std::get<Plan>(second.result)));

  auto edited_text = fixtures::six_node().serialize();
  auto pos = edited_text.find("edge|DEL|DOH|450|");
  ASSERT_NE(pos, std::string::npos);
  edited_text.replace(pos, 17, "edge|DEL|DOH|460|");
  auto edited = parse_database(edited_text);
  auto third = solve_cached(g, edited, cache);
  EXPECT_FALSE(third.cache_hit);
  EXPECT_EQ(std::get<Plan>(third.result).totals.fuel, 1160);

  auto bad = GoalBuilder().route("DEL", "LHR").deadline(1).done();
  auto before = cache.size();
  EXPECT_TRUE(std::holds_alternative<Infeasible>(solve_cached(bad, edited, cache).result));
  EXPECT_EQ(cache.size(), before);
  EXPECT_FALSE(solve_cached(bad, edited, cache).cache_hit);
}

TEST(Cache, LruEviction) {
  SolutionCache cache(2);
  Plan p;
  cache.put("a", "v", p);
  cache.put("b", "v", p);
  EXPECT_TRUE(cache.get("a", "v"));
  cache.put("c", "v", p);
  EXPECT_TRUE(cache.get("a", "v"));
  EXPECT_FALSE(cache.get("b", "v"));
  EXPECT_FALSE(cache.get("a", "w"));
}
