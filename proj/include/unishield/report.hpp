#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "unishield/router.hpp"
#include "unishield/scheduler.hpp"
#include "unishield/transport.hpp"
#include "unishield/types.hpp"

namespace unishield {

/// "no tampered region", or the tampered fraction (4 decimals), inclusive
/// bounding box and a 3x3-grid location phrase for the tampered centroid.
std::string summarize_region(const Mask& mask);

/// Name of the 3x3 cell containing (x, y) in a width x height frame:
/// upper-left, top, upper-right, left, center, right, lower-left, bottom,
/// lower-right.
std::string_view grid_location(double x, double y, int width, int height);

/// Text up to and including the first sentence terminator.
std::string first_sentence(std::string_view text);

/// Deterministic four-section report.
ForensicReport assemble_report(const RoutingDecision& routing, const ScheduleDecision& schedule,
                               const DetectionResult& detection, const ImageRecord& image);

nlohmann::json report_to_json(const ForensicReport& report);
std::string report_to_markdown(const ForensicReport& report);

// Canonical bytes of a report; the CLI and the service both emit this.
std::string report_to_json_text(const ForensicReport& report);

/// Structural check of a serialized report, including the localization
/// presence rule. Returns an empty string when valid, else the first problem.
std::string validate_report_json(const nlohmann::json& j);

inline constexpr std::string_view kSummarizerPromptVersion = "summarizer-prompt/1";
extern const std::string_view kSummarizerPrompt;

/// Template summarizer with an optional external adapter for the prose
/// sections. Machine fields (detection, localization) are never taken from
/// the adapter.
class Summarizer {
 public:
  void set_adapter(std::shared_ptr<Transport> adapter, std::chrono::milliseconds timeout,
                   bool fallback) {
    adapter_ = std::move(adapter);
    timeout_ = timeout;
    fallback_ = fallback;
  }
  bool has_adapter() const { return adapter_ != nullptr; }

  ForensicReport summarize(const RoutingDecision& routing, const ScheduleDecision& schedule,
                           const DetectionResult& detection, const ImageRecord& image,
                           std::vector<std::string>* warnings = nullptr) const;

  /// Throws Error{AdapterUnavailable} without an adapter; adapter failures
  /// propagate unless fallback is enabled, in which case the template report
  /// is returned and a warning appended.
  ForensicReport summarize_external(const RoutingDecision& routing,
                                    const ScheduleDecision& schedule,
                                    const DetectionResult& detection, const ImageRecord& image,
                                    std::vector<std::string>* warnings = nullptr) const;

 private:
  std::shared_ptr<Transport> adapter_;
  std::chrono::milliseconds timeout_{30000};
  bool fallback_ = true;
};

}  // namespace unishield
