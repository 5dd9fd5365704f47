#pragma once

#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vll/goal_spec.hpp"
#include "vll/text.hpp"

namespace vll {

struct Leg {
  std::string origin;
  std::string destination;
  double depart = 0.0;
  double arrive = 0.0;
  bool operator==(const Leg&) const = default;
};

struct PlanTotals {
  double fuel = 0.0;
  double risk = 0.0;
  double minutes = 0.0;
  bool operator==(const PlanTotals&) const = default;
};

// A solved route: chained legs, the totals the producer claims for them, and
// the database version the plan was computed against.
struct Plan {
  std::vector<Leg> legs;
  PlanTotals totals;
  Objective objective = Objective::min_fuel_cost;
  double objective_value = 0.0;
  std::string db_version;
  bool operator==(const Plan&) const = default;

  // Visited location codes, origin first. Empty for the identity route.
  std::vector<std::string> path() const {
    std::vector<std::string> out;
    if (legs.empty()) return out;
    out.push_back(legs.front().origin);
    for (const auto& l : legs) out.push_back(l.destination);
    return out;
  }
};

inline double objective_of(const PlanTotals& t, Objective o) {
  switch (o) {
    case Objective::min_fuel_cost: return t.fuel;
    case Objective::min_time: return t.minutes;
    case Objective::min_risk: return t.risk;
  }
  return t.fuel;
}

class PlanFormatError : public std::runtime_error {
 public:
  PlanFormatError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Line-oriented plan text, same record style as database files:
//   plan|1
//   db|<version>
//   objective|<name>|<value>
//   leg|<origin>|<destination>|<depart>|<arrive>
//   totals|<fuel>|<risk>|<minutes>
inline std::string render_plan(const Plan& p) {
  std::ostringstream out;
  out << "plan|1\n";
  out << "db|" << p.db_version << "\n";
  out << "objective|" << to_string(p.objective) << "|" << text::format_number(p.objective_value) << "\n";
  for (const auto& l : p.legs)
    out << "leg|" << l.origin << "|" << l.destination << "|" << text::format_number(l.depart) << "|"
        << text::format_number(l.arrive) << "\n";
  out << "totals|" << text::format_number(p.totals.fuel) << "|" << text::format_number(p.totals.risk) << "|"
      << text::format_number(p.totals.minutes) << "\n";
  return out.str();
}

inline Plan parse_plan(std::string_view body) {
  Plan p;
  bool saw_header = false, saw_totals = false;
  std::size_t lineno = 0;
  for (const auto& raw : text::split(body, '\n')) {
    ++lineno;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto f = text::split(line, '|');
    auto num = [&](std::size_t i) {
      auto v = text::parse_number(f[i]);
      if (!v) throw PlanFormatError("field " + std::to_string(i) + " is not a number", lineno);
      return *v;
    };
    if (f[0] == "plan") {
      if (f.size() != 2 || f[1] != "1") throw PlanFormatError("unsupported plan header", lineno);
      saw_header = true;
    } else if (f[0] == "db") {
      if (f.size() != 2) throw PlanFormatError("db record takes 1 field", lineno);
      p.db_version = f[1];
    } else if (f[0] == "objective") {
      if (f.size() != 3) throw PlanFormatError("objective record takes 2 fields", lineno);
      auto o = parse_objective(f[1]);
      if (!o) throw PlanFormatError("unknown objective '" + f[1] + "'", lineno);
      p.objective = *o;
      p.objective_value = num(2);
    } else if (f[0] == "leg") {
      if (f.size() != 5) throw PlanFormatError("leg record takes 4 fields", lineno);
      p.legs.push_back({f[1], f[2], num(3), num(4)});
    } else if (f[0] == "totals") {
      if (f.size() != 4) throw PlanFormatError("totals record takes 3 fields", lineno);
      p.totals = {num(1), num(2), num(3)};
      saw_totals = true;
    } else {
      throw PlanFormatError("unknown record kind '" + f[0] + "'", lineno);
    }
  }
  if (!saw_header) throw PlanFormatError("missing plan header", 1);
  if (!saw_totals) throw PlanFormatError("missing totals record", lineno);
  return p;
}

}  // namespace vll
