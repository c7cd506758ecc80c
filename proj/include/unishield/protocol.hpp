#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "unishield/types.hpp"

namespace unishield {

inline constexpr std::string_view kProtocolVersion = "unishield-adapter/1";

enum class AdapterTask { Detect, Route, Schedule, Summarize };

std::string_view to_string(AdapterTask task);
std::optional<AdapterTask> parse_task(std::string_view token);

struct AdapterRequest {
  std::string request_id;
  AdapterTask task = AdapterTask::Detect;
  const ImageRecord* image = nullptr;
  std::optional<ForgeryDomain> domain;
  nlohmann::json hints = nlohmann::json::object();
};

/// The request envelope as a JSON object (image embedded as base64).
nlohmann::json request_to_json(const AdapterRequest& request);

/// One-line serialization used over stdio and as the HTTP body.
std::string request_to_wire(const AdapterRequest& request);

/// A reply that passed schema validation with status = "ok".
struct AdapterReply {
  std::optional<Verdict> verdict;
  std::optional<double> confidence;
  std::optional<std::string> mask_rle;
  std::optional<std::string> explanation;
  std::optional<std::string> text;
};

/// Validates a raw reply against the wire schema for `request.task`.
/// Throws Error{ProtocolViolation} on schema failures (bad JSON, wrong types,
/// request_id mismatch, missing required fields, confidence outside [0,1])
/// and Error{AdapterError} when the adapter reports status = "error".
AdapterReply parse_reply(std::string_view raw, const AdapterRequest& request);

/// Builders used by in-process adapters so that every reply travels the same
/// validation path as external ones.
nlohmann::json make_ok_reply(std::string_view request_id);
nlohmann::json make_error_reply(std::string_view request_id, std::string_view message);

}  // namespace unishield
