#pragma once

// Service configuration: `key = value` text with `#` comments. VLL_API_KEY and
// VLL_ENDPOINT in the environment override the remote credentials/endpoint.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "vll/confidence.hpp"
#include "vll/interpreter.hpp"
#include "vll/remote_backend.hpp"
#include "vll/scripted_backend.hpp"

namespace vll {

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "config line " + std::to_string(line) + ": " + what : what), line(line) {}
  std::size_t line;
};

struct ThresholdConfig {
  bool adaptive = false;
  double tau = 0.85;  // fixed threshold, or the adaptive fallback
  double rho = 0.9;
  std::size_t window = 200;

  ThresholdPolicy make() const {
    return adaptive ? ThresholdPolicy::adaptive(rho, window, tau) : ThresholdPolicy::fixed(tau);
  }
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path database;
  BackendConfig backend;
  ThresholdConfig threshold;
  int max_rounds = 3;
  std::size_t cache_size = 1024;
  std::filesystem::path transcript_dir;
  std::filesystem::path head;     // optional calibration head file
  std::filesystem::path records;  // optional interaction record log (JSONL)

  void check() const {
    if (max_rounds < 0) throw ConfigError("max_rounds must be >= 0");
    if (port < 0 || port > 65535) throw ConfigError("port out of range");
    if (database.empty()) throw ConfigError("database path is required");
    if (!std::filesystem::is_regular_file(database)) throw ConfigError("database not found: " + database.string());
    if (transcript_dir.empty()) throw ConfigError("transcript_dir is required");
    if (!std::filesystem::is_directory(transcript_dir))
      throw ConfigError("transcript_dir is not a directory: " + transcript_dir.string());
    if (!head.empty() && !std::filesystem::is_regular_file(head))
      throw ConfigError("head file not found: " + head.string());
    if (!records.empty() && !std::filesystem::is_directory(records.parent_path().empty() ? "." : records.parent_path()))
      throw ConfigError("records directory not found: " + records.parent_path().string());
    try {
      backend.check();
      (void)threshold.make();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

// Relative paths resolve against `base`.
inline ServiceConfig parse_config(std::string_view body, const std::filesystem::path& base = {}) {
  ServiceConfig c;
  c.backend.seed = 42;
  auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() || base.empty() ? p : base / p;
  };
  std::size_t lineno = 0;
  for (const auto& raw : text::split(body, '\n')) {
    ++lineno;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key = value", lineno);
    std::string key(text::trim(line.substr(0, eq)));
    std::string val(text::trim(line.substr(eq + 1)));
    auto number = [&]() {
      auto v = text::parse_number(val);
      if (!v) throw ConfigError("'" + key + "' expects a number", lineno);
      return *v;
    };
    auto integer = [&]() {
      double v = number();
      if (v != std::floor(v) || v < 0) throw ConfigError("'" + key + "' expects a non-negative integer", lineno);
      return static_cast<std::uint64_t>(v);
    };

    if (key == "listen") {
      auto colon = val.rfind(':');
      if (colon == std::string::npos) throw ConfigError("listen expects host:port", lineno);
      c.host = val.substr(0, colon);
      auto p = text::parse_number(val.substr(colon + 1));
      if (!p) throw ConfigError("listen expects host:port", lineno);
      c.port = static_cast<int>(*p);
    } else if (key == "database") {
      c.database = path(val);
    } else if (key == "backend") {
      if (val == "scripted") c.backend.kind = BackendKind::scripted;
      else if (val == "remote") c.backend.kind = BackendKind::remote;
      else throw ConfigError("backend must be scripted or remote", lineno);
    } else if (key == "seed") {
      c.backend.seed = integer();
    } else if (key == "error_rate") {
      c.backend.profile.error_rate = number();
    } else if (key.rfind("error_rate.", 0) == 0) {
      auto slot = parse_slot_name(key.substr(11));
      if (!slot) throw ConfigError("unknown slot in '" + key + "'", lineno);
      c.backend.profile.slot_error_rates[*slot] = number();
    } else if (key == "coupling") {
      c.backend.profile.coupling = number();
    } else if (key == "remote.endpoint") {
      c.backend.remote.endpoint = val;
    } else if (key == "remote.model") {
      c.backend.remote.model = val;
    } else if (key == "remote.api_key") {
      c.backend.remote.api_key = val;
    } else if (key == "remote.max_in_flight") {
      c.backend.remote.max_in_flight = integer();
    } else if (key == "timeout_ms") {
      c.backend.timeout = std::chrono::milliseconds(integer());
    } else if (key == "threshold") {
      if (val == "adaptive") c.threshold.adaptive = true;
      else c.threshold.tau = number();
    } else if (key == "threshold.fallback") {
      c.threshold.tau = number();
    } else if (key == "threshold.rho") {
      c.threshold.rho = number();
    } else if (key == "threshold.window") {
      c.threshold.window = integer();
    } else if (key == "max_rounds") {
      auto v = text::parse_number(val);
      if (!v || *v != std::floor(*v)) throw ConfigError("max_rounds expects an integer", lineno);
      c.max_rounds = static_cast<int>(*v);
    } else if (key == "cache_size") {
      c.cache_size = integer();
    } else if (key == "transcript_dir") {
      c.transcript_dir = path(val);
    } else if (key == "head") {
      c.head = path(val);
    } else if (key == "records") {
      c.records = path(val);
    } else {
      throw ConfigError("unknown key '" + key + "'", lineno);
    }
  }
  return c;
}

inline void apply_environment(ServiceConfig& c) {
  if (const char* k = std::getenv("VLL_API_KEY"); k && *k) c.backend.remote.api_key = k;
  if (const char* e = std::getenv("VLL_ENDPOINT"); e && *e) c.backend.remote.endpoint = e;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline ServiceConfig load_config(const std::filesystem::path& p) {
  ServiceConfig c = parse_config(read_file(p), p.parent_path());
  apply_environment(c);
  return c;
}

inline std::unique_ptr<InterpreterBackend> make_backend(const BackendConfig& b) {
  b.check();
  if (b.kind == BackendKind::scripted) return std::make_unique<ScriptedBackend>(b.profile, *b.seed);
  return std::make_unique<RemoteBackend>(b.remote, b.timeout);
}

}  // namespace vll
