#pragma once

// Compliance checking for plans, independent of the planner: every observed
// value is recomputed from the legs and the database edges.

#include <sstream>
#include <string>
#include <vector>

#include "vll/domain_db.hpp"
#include "vll/goal_spec.hpp"
#include "vll/plan.hpp"
#include "vll/text.hpp"

namespace vll {

enum class CheckKind { route, deadline, weather, fuel, risk };

inline std::string_view to_string(CheckKind k) {
  switch (k) {
    case CheckKind::route: return "route";
    case CheckKind::deadline: return "deadline";
    case CheckKind::weather: return "weather";
    case CheckKind::fuel: return "fuel";
    case CheckKind::risk: return "risk";
  }
  return "route";
}

struct ComplianceCheck {
  CheckKind kind = CheckKind::route;
  double bound = 0.0;
  double observed = 0.0;
  bool pass = true;
  std::vector<std::string> notes;
  bool operator==(const ComplianceCheck&) const = default;
};

// A plan total that disagrees with the recomputed value.
struct TotalsDiscrepancy {
  std::string field;
  double stated = 0.0;
  double recomputed = 0.0;
  bool operator==(const TotalsDiscrepancy&) const = default;
};

struct ComplianceReport {
  std::vector<ComplianceCheck> checks;
  std::vector<TotalsDiscrepancy> discrepancies;
  bool overall = true;
  bool operator==(const ComplianceReport&) const = default;

  const ComplianceCheck* find(CheckKind k) const {
    for (const auto& c : checks)
      if (c.kind == k) return &c;
    return nullptr;
  }
};

inline ComplianceReport verify(const Plan& plan, const GoalSpec& goal, const LogisticsDatabase& db) {
  ComplianceReport report;

  // Walk the legs once, summing edge values and replaying the clock.
  double fuel = 0.0, risk = 0.0, clock = 0.0;
  std::size_t weather_hits = 0;
  std::vector<std::string> weather_notes;
  ComplianceCheck route{CheckKind::route, 0.0, 0.0, true, {}};
  auto problem = [&](std::string note) {
    route.observed += 1.0;
    route.notes.push_back(std::move(note));
  };

  for (std::size_t i = 0; i < plan.legs.size(); ++i) {
    const Leg& leg = plan.legs[i];
    std::string tag = "leg " + std::to_string(i + 1) + " " + leg.origin + "->" + leg.destination;
    if (i > 0 && plan.legs[i - 1].destination != leg.origin) problem(tag + ": not chained to previous leg");
    if (leg.depart != clock)
      problem(tag + ": departs at " + text::format_number(leg.depart) + ", expected " + text::format_number(clock));
    const RouteEdge* edge = db.find_edge(leg.origin, leg.destination);
    if (!edge) {
      problem(tag + ": no such edge");
      continue;
    }
    if (!edge->flyable) problem(tag + ": edge is not flyable");
    if (leg.arrive != leg.depart + edge->flight_time)
      problem(tag + ": arrival " + text::format_number(leg.arrive) + " does not match flight time " +
              text::format_number(edge->flight_time));
    if (goal.consider_weather()) {
      for (const auto& w : db.windows()) {
        if (w.location == leg.origin && w.closed_at(clock)) {
          ++weather_hits;
          weather_notes.push_back(tag + ": departs " + w.location + " during closure (" + w.reason + ")");
        }
        if (w.location == leg.destination && w.closed_at(clock + edge->flight_time)) {
          ++weather_hits;
          weather_notes.push_back(tag + ": arrives " + w.location + " during closure (" + w.reason + ")");
        }
      }
    }
    fuel += edge->fuel_cost;
    risk += edge->route_risk;
    clock += edge->flight_time;
  }

  auto origin = goal.location(SlotName::origin);
  auto destination = goal.location(SlotName::destination);
  if (origin && destination) {
    if (plan.legs.empty()) {
      if (*origin != *destination) problem("plan has no legs but origin differs from destination");
    } else {
      if (plan.legs.front().origin != *origin) problem("plan does not start at " + *origin);
      if (plan.legs.back().destination != *destination) problem("plan does not end at " + *destination);
    }
  }
  route.pass = route.observed == 0.0;
  report.checks.push_back(std::move(route));

  if (auto deadline = goal.number(SlotName::deadline))
    report.checks.push_back({CheckKind::deadline, *deadline, clock, clock <= *deadline, {}});
  if (goal.consider_weather())
    report.checks.push_back(
        {CheckKind::weather, 0.0, static_cast<double>(weather_hits), weather_hits == 0, weather_notes});
  if (auto max_fuel = goal.number(SlotName::max_fuel))
    report.checks.push_back({CheckKind::fuel, *max_fuel, fuel, fuel <= *max_fuel, {}});
  if (auto max_risk = goal.number(SlotName::max_risk))
    report.checks.push_back({CheckKind::risk, *max_risk, risk, risk <= *max_risk, {}});

  if (plan.totals.fuel != fuel) report.discrepancies.push_back({"fuel", plan.totals.fuel, fuel});
  if (plan.totals.risk != risk) report.discrepancies.push_back({"risk", plan.totals.risk, risk});
  if (plan.totals.minutes != clock) report.discrepancies.push_back({"minutes", plan.totals.minutes, clock});

  report.overall = report.discrepancies.empty();
  for (const auto& c : report.checks) report.overall = report.overall && c.pass;
  return report;
}

// "compliant", or one line per failed check followed by one per discrepancy.
inline std::string verdict_to_feedback(const ComplianceReport& report) {
  if (report.overall) return "compliant";
  std::vector<std::string> lines;
  for (const auto& c : report.checks) {
    if (c.pass) continue;
    lines.push_back(std::string(to_string(c.kind)) + " violated: bound " + text::format_number(c.bound) +
                    ", observed " + text::format_number(c.observed));
  }
  for (const auto& d : report.discrepancies)
    lines.push_back("totals mismatch: stated " + d.field + " " + text::format_number(d.stated) + ", recomputed " +
                    text::format_number(d.recomputed));
  return text::join(lines, "\n");
}

}  // namespace vll
