#pragma once

// HTTP routes over SessionService. Bodies are JSON carrying `"v": 1`.

#include <httplib.h>

#include <json.hpp>

#include "vll/service/session_service.hpp"

namespace vll {

struct BadRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace http_detail {

inline nlohmann::json parse_body(const std::string& body, bool allow_empty = false) {
  if (allow_empty && text::trim(body).empty()) return nlohmann::json::object();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw BadRequest(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw BadRequest("body must be a JSON object");
  if (!j.contains("v") || j["v"] != 1) throw BadRequest("unsupported or missing schema version 'v'");
  return j;
}

inline std::string string_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw BadRequest(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

inline std::vector<Answer> parse_answers(const nlohmann::json& j) {
  nlohmann::json list;
  if (j.contains("answers")) list = j["answers"];
  else if (j.contains("slot")) list = nlohmann::json::array({j});
  else throw BadRequest("expected 'answers' or 'slot'/'value'");
  if (!list.is_array() || list.empty()) throw BadRequest("'answers' must be a non-empty array");
  std::vector<Answer> out;
  for (const auto& a : list) {
    if (!a.is_object()) throw BadRequest("each answer must be an object");
    Answer ans;
    std::string slot = string_field(a, "slot");
    if (slot != "intent") {
      auto s = parse_slot_name(slot);
      if (!s) throw BadRequest("unknown slot '" + slot + "'");
      ans.slot = *s;
    }
    ans.value = string_field(a, "value");
    out.push_back(ans);
  }
  return out;
}

inline void send(httplib::Response& res, const ServiceResponse& r) {
  res.status = r.status;
  if (r.retry_after_s) res.set_header("Retry-After", std::to_string(*r.retry_after_s));
  res.set_content(r.body, "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    send(res, f());
  } catch (const BadRequest& e) {
    send(res, error_response(422, e.what()));
  } catch (const std::exception& e) {
    send(res, error_response(500, e.what()));
  }
}

}  // namespace http_detail

inline void mount_routes(httplib::Server& server, SessionService& svc) {
  using namespace http_detail;
  server.Post("/v1/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto j = parse_body(req.body, true);
      std::optional<int> rounds;
      if (j.contains("max_rounds")) {
        if (!j["max_rounds"].is_number_integer()) throw BadRequest("'max_rounds' must be an integer");
        rounds = j["max_rounds"].get<int>();
      }
      return svc.create_session(rounds);
    });
  });
  server.Post(R"(/v1/sessions/([^/]+)/message)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto j = parse_body(req.body);
      return svc.post_message(req.matches[1], string_field(j, "turn_id"), string_field(j, "text"));
    });
  });
  server.Post(R"(/v1/sessions/([^/]+)/clarify)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto j = parse_body(req.body);
      return svc.post_clarification(req.matches[1], string_field(j, "turn_id"), parse_answers(j));
    });
  });
  server.Get(R"(/v1/sessions/([^/]+)/plan)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return svc.get_plan(req.matches[1]); });
  });
  server.Get(R"(/v1/sessions/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { return svc.get_session(req.matches[1]); });
  });
  server.Get("/v1/health", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { return svc.health(); });
  });
}

}  // namespace vll
