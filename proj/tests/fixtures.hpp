#pragma once

#include <string>

#include "vll/domain_db.hpp"
#include "vll/goal_spec.hpp"

namespace fixtures {

inline std::string data(const std::string& name) { return std::string(VLL_DATA_DIR) + "/" + name; }

inline const vll::LogisticsDatabase& fig3() {
  static const vll::LogisticsDatabase db = vll::load_database(data("fig3.db"));
  return db;
}

inline const vll::LogisticsDatabase& six_node() {
  static const vll::LogisticsDatabase db = vll::load_database(data("six_node.db"));
  return db;
}

// Frozen with tests/oracles/canonical_db.py.
inline constexpr const char* kFig3Version = "bf15ac99e2bc71d5aaa5c18f9c9edf750c1785a8d16113434cc3f2f323526dda";
inline constexpr const char* kSixNodeVersion = "c6aa0e2dbd859d8fff4a98869b99fe4fa063aad573ec9544a5235ed456bd9d48";

struct GoalBuilder {
  vll::GoalSpec g;
  explicit GoalBuilder(vll::Intent i = vll::Intent::PlanRequest) { g.intent = i; }
  GoalBuilder& put(vll::SlotName n, vll::SlotValue v, double conf = 1.0,
                   vll::Provenance p = vll::Provenance::model) {
    g.set(vll::Slot{n, std::move(v), conf, p});
    return *this;
  }
  GoalBuilder& route(const std::string& o, const std::string& d,
                     vll::Objective obj = vll::Objective::min_fuel_cost) {
    put(vll::SlotName::origin, vll::LocationCode{o});
    put(vll::SlotName::destination, vll::LocationCode{d});
    put(vll::SlotName::objective, obj);
    return *this;
  }
  GoalBuilder& deadline(double m) { return put(vll::SlotName::deadline, vll::Minutes{m}); }
  GoalBuilder& max_fuel(double u) { return put(vll::SlotName::max_fuel, vll::Units{u}); }
  GoalBuilder& max_risk(double u) { return put(vll::SlotName::max_risk, vll::Units{u}); }
  GoalBuilder& weather(bool on) { return put(vll::SlotName::consider_weather, on); }
  vll::GoalSpec done() const { return g; }
};

}  // namespace fixtures
