#include "unishield/types.hpp"

#include <algorithm>
#include <cmath>

#include "unishield/error.hpp"
#include "unishield/image_io.hpp"

namespace unishield {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRle: return "MalformedRle";
    case ErrorCode::RunSumMismatch: return "RunSumMismatch";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingAnswerTag: return "MissingAnswerTag";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::AdapterUnavailable: return "AdapterUnavailable";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::InvalidDescriptor: return "InvalidDescriptor";
    case ErrorCode::NoDetectorForKey: return "NoDetectorForKey";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::AdapterError: return "AdapterError";
    case ErrorCode::MissingMaskSource: return "MissingMaskSource";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::SupportMismatch: return "SupportMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateClasses: return "DegenerateClasses";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kNone: return "none";
    case Stage::kRoute: return "route";
    case Stage::kSchedule: return "schedule";
    case Stage::kToolbox: return "toolbox";
    case Stage::kReport: return "report";
  }
  return "none";
}

std::string_view to_string(ForgeryDomain d) {
  switch (d) {
    case ForgeryDomain::IMDL: return "IMDL";
    case ForgeryDomain::DMDL: return "DMDL";
    case ForgeryDomain::DFD: return "DFD";
    case ForgeryDomain::AIGCD: return "AIGCD";
  }
  return "IMDL";
}

std::string_view to_string(ToolClass c) {
  return c == ToolClass::LLM_BASED ? "LLM_BASED" : "NON_LLM_BASED";
}

std::string_view to_string(Verdict v) { return v == Verdict::FAKE ? "FAKE" : "REAL"; }

std::optional<ForgeryDomain> parse_domain(std::string_view token) {
  for (auto d : kAllDomains) {
    if (to_string(d) == token) return d;
  }
  return std::nullopt;
}

std::optional<ToolClass> parse_tool_class(std::string_view token) {
  for (auto c : kAllToolClasses) {
    if (to_string(c) == token) return c;
  }
  return std::nullopt;
}

std::optional<Verdict> parse_verdict(std::string_view token) {
  if (token == "FAKE") return Verdict::FAKE;
  if (token == "REAL") return Verdict::REAL;
  return std::nullopt;
}

Mask::Mask(int width, int height)
    : Mask(width, height,
           std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                     static_cast<std::size_t>(std::max(height, 0)))) {}

Mask::Mask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "mask dimensions must be positive");
  }
  if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::DimensionMismatch, "mask bit count does not match width*height");
  }
  if (std::any_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b > 1; })) {
    throw Error(ErrorCode::InvalidArgument, "mask bits must be 0 or 1");
  }
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

ImageRecord ImageRecord::decode(std::string id, std::vector<std::uint8_t> bytes) {
  if (id.empty()) throw Error(ErrorCode::InvalidArgument, "image id must be non-empty");
  auto decoded = decode_rgb(bytes);
  ImageRecord r;
  r.id_ = std::move(id);
  r.width_ = decoded.width;
  r.height_ = decoded.height;
  r.bytes_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
  r.pixels_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(decoded.rgb));
  return r;
}

ImageRecord ImageRecord::from_pixels(std::string id, int width, int height,
                                     std::vector<std::uint8_t> rgb) {
  if (id.empty()) throw Error(ErrorCode::InvalidArgument, "image id must be non-empty");
  if (width < 1 || height < 1 ||
      rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    throw Error(ErrorCode::DimensionMismatch, "pixel buffer does not match width*height*3");
  }
  ImageRecord r;
  r.id_ = std::move(id);
  r.width_ = width;
  r.height_ = height;
  r.bytes_ = std::make_shared<const std::vector<std::uint8_t>>(encode_png(width, height, rgb));
  r.pixels_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(rgb));
  return r;
}

Verdict verdict_from_confidence(double confidence, double threshold) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw Error(ErrorCode::OutOfRange, "confidence outside [0,1]");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::OutOfRange, "threshold outside (0,1)");
  }
  return confidence >= threshold ? Verdict::FAKE : Verdict::REAL;
}

}  // namespace unishield
