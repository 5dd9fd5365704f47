#pragma once

// Resource-constrained route search. Labels carry accumulated (fuel, risk,
// time) and are expanded best-first by (objective, legs, path codes); a label
// is discarded when another label at the same node dominates it.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vll/domain_db.hpp"
#include "vll/goal_spec.hpp"
#include "vll/plan.hpp"

namespace vll {

struct Infeasible {
  std::string reason;
  bool operator==(const Infeasible&) const = default;
};

using SolveResult = std::variant<Plan, Infeasible>;

// Budgets and windows a search must respect.
struct RouteConstraints {
  std::optional<double> deadline;
  std::optional<double> max_fuel;
  std::optional<double> max_risk;
  bool weather = false;

  static RouteConstraints from_goal(const GoalSpec& g) {
    RouteConstraints c;
    c.deadline = g.number(SlotName::deadline);
    c.max_fuel = g.number(SlotName::max_fuel);
    c.max_risk = g.number(SlotName::max_risk);
    c.weather = g.consider_weather();
    return c;
  }
};

struct SolveOptions {
  bool prune = true;  // dominance pruning; off only for cross-checks
};

struct SearchLabel {
  std::size_t node = 0;
  double fuel = 0.0;
  double risk = 0.0;
  double time = 0.0;
  std::vector<std::size_t> path;  // node indices from the origin, inclusive
  bool alive = true;
};

namespace planner_detail {

class Search {
 public:
  Search(const LogisticsDatabase& db, Objective objective, RouteConstraints limits, SolveOptions opts)
      : db_(db), objective_(objective), limits_(limits), opts_(opts) {
    const auto& locs = db.locations();  // sorted by code, so index order is code order
    for (std::size_t i = 0; i < locs.size(); ++i)
      adjacency_.emplace_back();
    for (const auto& e : db.edges()) {
      if (!e.flyable) continue;
      adjacency_[index_of(e.origin)].push_back(&e);
    }
  }

  std::optional<Plan> run(const std::string& origin, const std::string& destination) {
    labels_.clear();
    at_node_.assign(db_.locations().size(), {});
    std::size_t src = index_of(origin), dst = index_of(destination);
    if (limits_.weather && db_.closed_at(origin, 0.0)) return std::nullopt;

    auto cmp = [this](std::size_t a, std::size_t b) { return better(labels_[b], labels_[a]); };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cmp)> open(cmp);
    labels_.push_back(SearchLabel{src, 0.0, 0.0, 0.0, {src}, true});
    at_node_[src].push_back(0);
    open.push(0);

    while (!open.empty()) {
      std::size_t id = open.top();
      open.pop();
      if (!labels_[id].alive) continue;
      if (labels_[id].node == dst) return to_plan(labels_[id]);
      const SearchLabel cur = labels_[id];
      for (const RouteEdge* e : adjacency_[cur.node]) {
        std::size_t next = index_of(e->destination);
        if (std::find(cur.path.begin(), cur.path.end(), next) != cur.path.end()) continue;
        SearchLabel l{next, cur.fuel + e->fuel_cost, cur.risk + e->route_risk, cur.time + e->flight_time,
                      cur.path, true};
        l.path.push_back(next);
        if (limits_.max_fuel && l.fuel > *limits_.max_fuel) continue;
        if (limits_.max_risk && l.risk > *limits_.max_risk) continue;
        if (limits_.deadline && l.time > *limits_.deadline) continue;
        if (limits_.weather && (db_.closed_at(e->origin, cur.time) || db_.closed_at(e->destination, l.time)))
          continue;
        if (opts_.prune && !admit(l)) continue;
        labels_.push_back(std::move(l));
        std::size_t nid = labels_.size() - 1;
        at_node_[next].push_back(nid);
        open.push(nid);
      }
    }
    return std::nullopt;
  }

 private:
  std::size_t index_of(const std::string& code) const {
    const auto& locs = db_.locations();
    auto it = std::lower_bound(locs.begin(), locs.end(), code,
                               [](const Location& l, const std::string& c) { return l.code < c; });
    return static_cast<std::size_t>(it - locs.begin());
  }

  double objective_of(const SearchLabel& l) const {
    switch (objective_) {
      case Objective::min_fuel_cost: return l.fuel;
      case Objective::min_time: return l.time;
      case Objective::min_risk: return l.risk;
    }
    return l.fuel;
  }

  // Strict total order used for expansion and tie-breaking.
  bool better(const SearchLabel& a, const SearchLabel& b) const {
    double oa = objective_of(a), ob = objective_of(b);
    if (oa != ob) return oa < ob;
    if (a.path.size() != b.path.size()) return a.path.size() < b.path.size();
    return a.path < b.path;
  }

  bool dominates(const SearchLabel& a, const SearchLabel& b) const {
    if (a.fuel > b.fuel || a.risk > b.risk || a.time > b.time || a.path.size() > b.path.size()) return false;
    if (limits_.weather) {
      // Arrival time matters for closures, so only identical timing with a
      // subset of visited nodes is safe to prune.
      if (a.time != b.time) return false;
      for (auto n : a.path)
        if (std::find(b.path.begin(), b.path.end(), n) == b.path.end()) return false;
    }
    return better(a, b);
  }

  bool admit(const SearchLabel& l) {
    auto& here = at_node_[l.node];
    for (auto id : here)
      if (labels_[id].alive && dominates(labels_[id], l)) return false;
    for (auto id : here)
      if (labels_[id].alive && dominates(l, labels_[id])) labels_[id].alive = false;
    std::erase_if(here, [&](std::size_t id) { return !labels_[id].alive; });
    return true;
  }

  Plan to_plan(const SearchLabel& l) const {
    Plan p;
    p.objective = objective_;
    p.db_version = db_.version();
    double t = 0.0;
    for (std::size_t i = 0; i + 1 < l.path.size(); ++i) {
      const auto& o = db_.locations()[l.path[i]].code;
      const auto& d = db_.locations()[l.path[i + 1]].code;
      const RouteEdge* e = db_.find_edge(o, d);
      p.legs.push_back({o, d, t, t + e->flight_time});
      t += e->flight_time;
    }
    p.totals = {l.fuel, l.risk, l.time};
    p.objective_value = objective_of(l);
    return p;
  }

  const LogisticsDatabase& db_;
  Objective objective_;
  RouteConstraints limits_;
  SolveOptions opts_;
  std::vector<std::vector<const RouteEdge*>> adjacency_;
  std::vector<SearchLabel> labels_;
  std::vector<std::vector<std::size_t>> at_node_;
};

}  // namespace planner_detail

// Optimal route for a PlanRequest under its budgets, deadline and (optionally)
// weather closures. Ties go to fewer legs, then lexicographically smaller codes.
inline SolveResult solve(const GoalSpec& goal, const LogisticsDatabase& db, const SolveOptions& opts = {}) {
  auto origin = goal.location(SlotName::origin);
  auto destination = goal.location(SlotName::destination);
  auto objective = goal.objective();
  if (goal.intent != Intent::PlanRequest || !origin || !destination || !objective)
    throw std::invalid_argument("solve requires a PlanRequest with origin, destination and objective");
  for (const auto& code : {*origin, *destination})
    if (!db.find_location(code)) return Infeasible{"unknown location " + code};

  if (*origin == *destination) {
    Plan p;
    p.objective = *objective;
    p.db_version = db.version();
    return p;
  }

  auto limits = RouteConstraints::from_goal(goal);
  auto attempt = [&](const RouteConstraints& c) {
    return planner_detail::Search(db, *objective, c, opts).run(*origin, *destination);
  };
  if (auto plan = attempt(limits)) return *plan;
  if (!attempt(RouteConstraints{})) return Infeasible{"no route"};

  // Name the constraint whose removal alone restores feasibility.
  std::vector<std::pair<std::string, RouteConstraints>> relaxations;
  if (limits.deadline) {
    auto c = limits;
    c.deadline.reset();
    relaxations.emplace_back("deadline", c);
  }
  if (limits.weather) {
    auto c = limits;
    c.weather = false;
    relaxations.emplace_back("weather", c);
  }
  if (limits.max_fuel) {
    auto c = limits;
    c.max_fuel.reset();
    relaxations.emplace_back("max_fuel", c);
  }
  if (limits.max_risk) {
    auto c = limits;
    c.max_risk.reset();
    relaxations.emplace_back("max_risk", c);
  }
  std::vector<std::string> binding;
  for (const auto& [name, c] : relaxations)
    if (attempt(c)) binding.push_back(name);
  if (!binding.empty()) return Infeasible{"constraint " + text::join(binding, ", ") + " cannot be met"};
  std::vector<std::string> all;
  for (const auto& [name, c] : relaxations) all.push_back(name);
  return Infeasible{"constraints " + text::join(all, ", ") + " cannot be met together"};
}

struct CachedSolve {
  SolveResult result;
  bool cache_hit = false;
};

// Infeasible outcomes are never stored.
inline CachedSolve solve_cached(const GoalSpec& goal, const LogisticsDatabase& db, SolutionCache& cache) {
  std::string key = goal_key(goal, db.version());
  if (auto hit = cache.get(key, db.version())) return {*hit, true};
  SolveResult r = solve(goal, db);
  if (auto* p = std::get_if<Plan>(&r)) cache.put(key, db.version(), *p);
  return {std::move(r), false};
}

}  // namespace vll
