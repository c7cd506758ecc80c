#include "unishield/protocol.hpp"

#include <cmath>

#include "unishield/encoding.hpp"
#include "unishield/error.hpp"

namespace unishield {

using nlohmann::json;

std::string_view to_string(AdapterTask task) {
  switch (task) {
    case AdapterTask::Detect: return "detect";
    case AdapterTask::Route: return "route";
    case AdapterTask::Schedule: return "schedule";
    case AdapterTask::Summarize: return "summarize";
  }
  return "detect";
}

std::optional<AdapterTask> parse_task(std::string_view token) {
  for (auto t : {AdapterTask::Detect, AdapterTask::Route, AdapterTask::Schedule,
                 AdapterTask::Summarize}) {
    if (to_string(t) == token) return t;
  }
  return std::nullopt;
}

json request_to_json(const AdapterRequest& request) {
  json j;
  j["protocol"] = kProtocolVersion;
  j["request_id"] = request.request_id;
  j["task"] = to_string(request.task);
  j["image_b64"] = request.image ? base64_encode(request.image->bytes()) : std::string();
  j["domain"] = request.domain ? json(to_string(*request.domain)) : json(nullptr);
  j["hints"] = request.hints.is_object() ? request.hints : json::object();
  return j;
}

std::string request_to_wire(const AdapterRequest& request) {
  // dump() escapes control characters, so the line never contains '\n'.
  return request_to_json(request).dump(-1, ' ', false, json::error_handler_t::replace);
}

namespace {

[[noreturn]] void violation(const std::string& why) {
  throw Error(ErrorCode::ProtocolViolation, "protocol violation: " + why);
}

std::optional<std::string> optional_string(const json& reply, const char* key) {
  auto it = reply.find(key);
  if (it == reply.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) violation(std::string("field '") + key + "' must be a string or null");
  return it->get<std::string>();
}

}  // namespace

AdapterReply parse_reply(std::string_view raw, const AdapterRequest& request) {
  json reply;
  try {
    reply = json::parse(raw);
  } catch (const json::exception& e) {
    violation(std::string("reply is not valid JSON: ") + e.what());
  }
  if (!reply.is_object()) violation("reply must be a JSON object");

  auto id = reply.find("request_id");
  if (id == reply.end() || !id->is_string()) violation("missing request_id");
  if (id->get<std::string>() != request.request_id) violation("request_id mismatch");

  auto status = reply.find("status");
  if (status == reply.end() || !status->is_string()) violation("missing status");
  const auto status_text = status->get<std::string>();
  if (status_text == "error") {
    auto msg = optional_string(reply, "error");
    throw Error(ErrorCode::AdapterError, "adapter error: " + msg.value_or("(no message)"));
  }
  if (status_text != "ok") violation("status must be \"ok\" or \"error\"");

  AdapterReply out;
  out.mask_rle = optional_string(reply, "mask_rle");
  out.explanation = optional_string(reply, "explanation");
  out.text = optional_string(reply, "text");

  if (auto v = optional_string(reply, "verdict")) {
    out.verdict = parse_verdict(*v);
    if (!out.verdict) violation("verdict must be \"REAL\" or \"FAKE\"");
  }
  auto conf = reply.find("confidence");
  if (conf != reply.end() && !conf->is_null()) {
    if (!conf->is_number()) violation("confidence must be a number or null");
    const double c = conf->get<double>();
    if (!std::isfinite(c) || c < 0.0 || c > 1.0) violation("confidence outside [0,1]");
    out.confidence = c;
  }

  if (request.task == AdapterTask::Detect) {
    if (!out.verdict) violation("detect reply requires verdict");
    if (!out.confidence) violation("detect reply requires confidence");
  } else if (!out.text) {
    violation(std::string(to_string(request.task)) + " reply requires text");
  }
  return out;
}

json make_ok_reply(std::string_view request_id) {
  return json{{"request_id", request_id}, {"status", "ok"},      {"verdict", nullptr},
              {"confidence", nullptr},    {"mask_rle", nullptr}, {"explanation", nullptr},
              {"text", nullptr},          {"error", nullptr}};
}

json make_error_reply(std::string_view request_id, std::string_view message) {
  auto j = make_ok_reply(request_id);
  j["status"] = "error";
  j["error"] = message;
  return j;
}

}  // namespace unishield
