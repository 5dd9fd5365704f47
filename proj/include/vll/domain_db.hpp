#pragma once

// In-memory logistics knowledge base: locations (with prose aliases), directed
// route edges, weather closure windows, and a version-checked solution cache.
//
// File format, one record per line, `#` starts a comment:
//   loc|<code>|<name>|<kind>|<lat>|<lon>[|<alias>;<alias>...]
//   edge|<origin>|<destination>|<fuel>|<risk>|<minutes>|<flyable>
//   wx|<location>|<closed_from>|<closed_until>|<reason>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <list>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "vll/hash.hpp"
#include "vll/plan.hpp"
#include "vll/text.hpp"

namespace vll {

enum class LocationKind { airport, airbase, depot };

inline std::string_view to_string(LocationKind k) {
  switch (k) {
    case LocationKind::airport: return "airport";
    case LocationKind::airbase: return "airbase";
    case LocationKind::depot: return "depot";
  }
  return "airport";
}

inline std::optional<LocationKind> parse_location_kind(std::string_view s) {
  for (auto k : {LocationKind::airport, LocationKind::airbase, LocationKind::depot})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct Location {
  std::string code;
  std::string name;
  LocationKind kind = LocationKind::airport;
  double latitude = 0.0;
  double longitude = 0.0;
  std::vector<std::string> aliases;
  bool operator==(const Location&) const = default;
};

struct RouteEdge {
  std::string origin;
  std::string destination;
  double fuel_cost = 0.0;
  double route_risk = 0.0;
  double flight_time = 0.0;
  bool flyable = true;
  bool operator==(const RouteEdge&) const = default;
};

// Location is closed for departures and arrivals during [closed_from, closed_until).
struct WeatherWindow {
  std::string location;
  double closed_from = 0.0;
  double closed_until = 0.0;
  std::string reason;
  bool operator==(const WeatherWindow&) const = default;

  bool closed_at(double minute) const { return minute >= closed_from && minute < closed_until; }
};

class DatabaseError : public std::runtime_error {
 public:
  DatabaseError(const std::string& what, std::size_t line = 0, std::string field = {})
      : std::runtime_error(line ? "line " + std::to_string(line) + (field.empty() ? "" : " field '" + field + "'") +
                                      ": " + what
                                : what),
        line_(line),
        field_(std::move(field)) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class UnknownLocationError : public std::runtime_error {
 public:
  UnknownLocationError(std::string code, std::vector<std::string> suggestions)
      : std::runtime_error(message(code, suggestions)), code_(std::move(code)), suggestions_(std::move(suggestions)) {}
  const std::string& code() const noexcept { return code_; }
  const std::vector<std::string>& suggestions() const noexcept { return suggestions_; }

 private:
  static std::string message(const std::string& code, const std::vector<std::string>& s) {
    std::string m = "unknown location '" + code + "'";
    if (!s.empty()) m += "; did you mean " + text::join(s, ", ") + "?";
    return m;
  }
  std::string code_;
  std::vector<std::string> suggestions_;
};

// Edges and windows incident to a set of locations, ordered by (origin, destination).
struct FactSet {
  std::vector<RouteEdge> edges;
  std::vector<WeatherWindow> windows;
  bool empty() const { return edges.empty() && windows.empty(); }
  bool operator==(const FactSet&) const = default;
};

class LogisticsDatabase {
 public:
  LogisticsDatabase() : version_(sha256_hex("")) {}

  // Validates invariants, sorts into canonical order and computes the version.
  static LogisticsDatabase from_records(std::vector<Location> locations, std::vector<RouteEdge> edges,
                                        std::vector<WeatherWindow> windows) {
    LogisticsDatabase db;
    for (auto& l : locations) std::sort(l.aliases.begin(), l.aliases.end());
    std::sort(locations.begin(), locations.end(), [](auto& a, auto& b) { return a.code < b.code; });
    std::sort(edges.begin(), edges.end(), [](auto& a, auto& b) {
      return std::tie(a.origin, a.destination) < std::tie(b.origin, b.destination);
    });
    std::sort(windows.begin(), windows.end(), [](auto& a, auto& b) {
      return std::tie(a.location, a.closed_from, a.closed_until, a.reason) <
             std::tie(b.location, b.closed_from, b.closed_until, b.reason);
    });

    for (std::size_t i = 0; i < locations.size(); ++i) {
      const auto& l = locations[i];
      if (!is_location_code(l.code)) throw DatabaseError("location code must match [A-Z]{3}: '" + l.code + "'");
      if (!(l.latitude >= -90.0 && l.latitude <= 90.0))
        throw DatabaseError("latitude out of range for " + l.code);
      if (!(l.longitude >= -180.0 && l.longitude <= 180.0))
        throw DatabaseError("longitude out of range for " + l.code);
      if (i > 0 && locations[i - 1].code == l.code) throw DatabaseError("duplicate location " + l.code);
    }
    db.locations_ = std::move(locations);
    for (std::size_t i = 0; i < db.locations_.size(); ++i) db.index_[db.locations_[i].code] = i;

    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& e = edges[i];
      std::string tag = "edge " + e.origin + "->" + e.destination;
      if (!db.find_location(e.origin)) throw DatabaseError(tag + ": unknown origin");
      if (!db.find_location(e.destination)) throw DatabaseError(tag + ": unknown destination");
      if (e.origin == e.destination) throw DatabaseError(tag + ": origin equals destination");
      for (double v : {e.fuel_cost, e.route_risk, e.flight_time})
        if (!std::isfinite(v) || v < 0.0) throw DatabaseError(tag + ": numeric fields must be finite and >= 0");
      if (i > 0 && edges[i - 1].origin == e.origin && edges[i - 1].destination == e.destination)
        throw DatabaseError("duplicate " + tag);
    }
    db.edges_ = std::move(edges);

    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto& w = windows[i];
      if (!db.find_location(w.location)) throw DatabaseError("weather window at unknown location " + w.location);
      if (!(w.closed_from < w.closed_until))
        throw DatabaseError("weather window at " + w.location + ": closed_from must precede closed_until");
    }
    db.windows_ = std::move(windows);
    db.version_ = sha256_hex(db.serialize());
    return db;
  }

  const std::vector<Location>& locations() const { return locations_; }
  const std::vector<RouteEdge>& edges() const { return edges_; }
  const std::vector<WeatherWindow>& windows() const { return windows_; }
  const std::string& version() const { return version_; }

  const Location* find_location(std::string_view code) const {
    auto it = index_.find(std::string(code));
    return it == index_.end() ? nullptr : &locations_[it->second];
  }

  const RouteEdge* find_edge(std::string_view origin, std::string_view destination) const {
    using Key = std::tuple<std::string_view, std::string_view>;
    auto it = std::lower_bound(edges_.begin(), edges_.end(), Key{origin, destination},
                               [](const RouteEdge& e, const Key& k) { return Key{e.origin, e.destination} < k; });
    if (it == edges_.end() || it->origin != origin || it->destination != destination) return nullptr;
    return &*it;
  }

  std::vector<const RouteEdge*> edges_from(std::string_view origin) const {
    std::vector<const RouteEdge*> out;
    for (const auto& e : edges_)
      if (e.origin == origin) out.push_back(&e);
    return out;
  }

  std::vector<const WeatherWindow*> windows_at(std::string_view code) const {
    std::vector<const WeatherWindow*> out;
    for (const auto& w : windows_)
      if (w.location == code) out.push_back(&w);
    return out;
  }

  bool closed_at(std::string_view code, double minute) const {
    for (const auto& w : windows_)
      if (w.location == code && w.closed_at(minute)) return true;
    return false;
  }

  // Known codes within `max_distance` edits of `code`, closest first.
  std::vector<std::string> nearest_codes(std::string_view code, std::size_t max_distance = 2) const {
    std::vector<std::pair<std::size_t, std::string>> scored;
    std::string up = text::upper(code);
    for (const auto& l : locations_) {
      auto d = text::edit_distance(up, l.code);
      if (d <= max_distance) scored.emplace_back(d, l.code);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (auto& [d, c] : scored) out.push_back(c);
    return out;
  }

  // Canonical serialization: records grouped loc, edge, wx, each sorted by key fields.
  std::string serialize() const {
    std::ostringstream out;
    for (const auto& l : locations_) {
      out << "loc|" << l.code << "|" << l.name << "|" << to_string(l.kind) << "|" << text::format_number(l.latitude)
          << "|" << text::format_number(l.longitude);
      if (!l.aliases.empty()) out << "|" << text::join(l.aliases, ";");
      out << "\n";
    }
    for (const auto& e : edges_)
      out << "edge|" << e.origin << "|" << e.destination << "|" << text::format_number(e.fuel_cost) << "|"
          << text::format_number(e.route_risk) << "|" << text::format_number(e.flight_time) << "|"
          << (e.flyable ? "true" : "false") << "\n";
    for (const auto& w : windows_)
      out << "wx|" << w.location << "|" << text::format_number(w.closed_from) << "|"
          << text::format_number(w.closed_until) << "|" << w.reason << "\n";
    return out.str();
  }

 private:
  std::vector<Location> locations_;
  std::vector<RouteEdge> edges_;
  std::vector<WeatherWindow> windows_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string version_;
};

inline LogisticsDatabase parse_database(std::string_view body) {
  std::vector<Location> locations;
  std::vector<RouteEdge> edges;
  std::vector<WeatherWindow> windows;
  std::map<std::pair<std::string, std::string>, std::size_t> edge_lines;
  std::map<std::string, std::size_t> loc_lines;

  std::size_t lineno = 0;
  for (const auto& raw : text::split(body, '\n')) {
    ++lineno;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto f = text::split(line, '|');
    for (auto& field : f) field = std::string(text::trim(field));
    auto number = [&](std::size_t i, const char* name) {
      auto v = text::parse_number(f[i]);
      if (!v) throw DatabaseError("expected a number, got '" + f[i] + "'", lineno, name);
      return *v;
    };
    auto code = [&](std::size_t i, const char* name) {
      if (!is_location_code(f[i])) throw DatabaseError("expected a 3-letter code, got '" + f[i] + "'", lineno, name);
      return f[i];
    };

    if (f[0] == "loc") {
      if (f.size() != 6 && f.size() != 7) throw DatabaseError("loc record takes 5 or 6 fields", lineno);
      Location l;
      l.code = code(1, "code");
      l.name = f[2];
      auto kind = parse_location_kind(f[3]);
      if (!kind) throw DatabaseError("unknown location kind '" + f[3] + "'", lineno, "kind");
      l.kind = *kind;
      l.latitude = number(4, "lat");
      l.longitude = number(5, "lon");
      if (l.latitude < -90.0 || l.latitude > 90.0) throw DatabaseError("latitude out of range", lineno, "lat");
      if (l.longitude < -180.0 || l.longitude > 180.0) throw DatabaseError("longitude out of range", lineno, "lon");
      if (f.size() == 7)
        for (auto& a : text::split(f[6], ';')) {
          auto t = std::string(text::trim(a));
          if (!t.empty()) l.aliases.push_back(t);
        }
      if (auto [it, fresh] = loc_lines.emplace(l.code, lineno); !fresh)
        throw DatabaseError("duplicate location " + l.code + " (first defined on line " + std::to_string(it->second) +
                                ")",
                            lineno, "code");
      locations.push_back(std::move(l));
    } else if (f[0] == "edge") {
      if (f.size() != 7) throw DatabaseError("edge record takes 6 fields", lineno);
      RouteEdge e;
      e.origin = code(1, "origin");
      e.destination = code(2, "destination");
      e.fuel_cost = number(3, "fuel");
      e.route_risk = number(4, "risk");
      e.flight_time = number(5, "time");
      if (f[6] == "true") e.flyable = true;
      else if (f[6] == "false") e.flyable = false;
      else throw DatabaseError("expected true or false, got '" + f[6] + "'", lineno, "flyable");
      if (e.origin == e.destination) throw DatabaseError("edge origin equals destination", lineno, "destination");
      for (auto [v, name] : {std::pair{e.fuel_cost, "fuel"}, {e.route_risk, "risk"}, {e.flight_time, "time"}})
        if (v < 0.0) throw DatabaseError("must be >= 0", lineno, name);
      if (auto [it, fresh] = edge_lines.emplace(std::pair{e.origin, e.destination}, lineno); !fresh)
        throw DatabaseError("duplicate edge " + e.origin + "->" + e.destination + " (first defined on line " +
                                std::to_string(it->second) + ")",
                            lineno);
      edges.push_back(std::move(e));
    } else if (f[0] == "wx") {
      if (f.size() != 5) throw DatabaseError("wx record takes 4 fields", lineno);
      WeatherWindow w;
      w.location = code(1, "loc");
      w.closed_from = number(2, "from");
      w.closed_until = number(3, "to");
      w.reason = f[4];
      if (!(w.closed_from < w.closed_until)) throw DatabaseError("closed_from must precede closed_until", lineno, "to");
      windows.push_back(std::move(w));
    } else {
      throw DatabaseError("unknown record kind '" + f[0] + "'", lineno, "kind");
    }
  }
  if (locations.empty() && edges.empty() && windows.empty()) throw DatabaseError("empty database");
  return LogisticsDatabase::from_records(std::move(locations), std::move(edges), std::move(windows));
}

inline LogisticsDatabase load_database(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatabaseError("cannot open database file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_database(buf.str());
}

// All edges and windows touching any of `codes`.
inline FactSet lookup_facts(const LogisticsDatabase& db, const std::vector<std::string>& codes) {
  std::set<std::string> wanted;
  for (const auto& c : codes) {
    if (!db.find_location(c)) throw UnknownLocationError(c, db.nearest_codes(c));
    wanted.insert(c);
  }
  FactSet facts;
  for (const auto& e : db.edges())
    if (wanted.count(e.origin) || wanted.count(e.destination)) facts.edges.push_back(e);
  for (const auto& w : db.windows())
    if (wanted.count(w.location)) facts.windows.push_back(w);
  return facts;
}

// ---------------------------------------------------------------------------
// Solution cache

struct CachedSolution {
  std::string key;
  std::string db_version;
  Plan plan;
  std::chrono::system_clock::time_point stored_at;
};

// Thread-safe, bounded (least-recently-used eviction), last write wins.
class SolutionCache {
 public:
  explicit SolutionCache(std::size_t capacity = 1024) : capacity_(capacity == 0 ? 1 : capacity) {}

  std::optional<Plan> get(const std::string& key, std::string_view current_version) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    if (it->second.solution.db_version != current_version) return std::nullopt;
    order_.splice(order_.begin(), order_, it->second.pos);
    return it->second.solution.plan;
  }

  void put(const std::string& key, std::string_view db_version, Plan plan) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      order_.erase(it->second.pos);
      entries_.erase(it);
    }
    order_.push_front(key);
    entries_.emplace(key, Entry{CachedSolution{key, std::string(db_version), std::move(plan),
                                               std::chrono::system_clock::now()},
                                order_.begin()});
    while (entries_.size() > capacity_) {
      entries_.erase(order_.back());
      order_.pop_back();
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  struct Entry {
    CachedSolution solution;
    std::list<std::string>::iterator pos;
  };
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<std::string> order_;
  std::unordered_map<std::string, Entry> entries_;
};

}  // namespace vll
