#include "unishield/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "unishield/error.hpp"
#include "unishield/features.hpp"
#include "unishield/rle.hpp"

namespace unishield {

using nlohmann::json;

const std::string_view kSummarizerPrompt =
    "Write a short forensic report for this image. Give a one-sentence description of the "
    "scene, then explain the reasoning behind the detection conclusion provided in "
    "template_report, citing low-level visual cues (unnatural textures, edge artifacts, "
    "inconsistent noise) or high-level semantic inconsistencies (unnatural expressions, "
    "scene conflicts). Do not change the verdict, confidence, track or detector.";

namespace {

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

std::string_view grid_location(double x, double y, int width, int height) {
  static constexpr std::string_view kCells[3][3] = {
      {"upper-left", "top", "upper-right"},
      {"left", "center", "right"},
      {"lower-left", "bottom", "lower-right"}};
  const int col = std::clamp(static_cast<int>(3.0 * x / width), 0, 2);
  const int row = std::clamp(static_cast<int>(3.0 * y / height), 0, 2);
  return kCells[row][col];
}

std::string summarize_region(const Mask& mask) {
  const auto count = mask.count();
  if (count == 0) return "no tampered region";
  int x0 = mask.width();
  int y0 = mask.height();
  int x1 = -1;
  int y1 = -1;
  double sx = 0.0;
  double sy = 0.0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
      sx += x + 0.5;
      sy += y + 0.5;
    }
  }
  const double n = static_cast<double>(count);
  const double fraction = n / static_cast<double>(mask.size());
  std::ostringstream out;
  out << "tampered area fraction " << format_fixed(fraction, 4) << ", bounding box (" << x0 << ","
      << y0 << "," << x1 << "," << y1 << "), located "
      << grid_location(sx / n, sy / n, mask.width(), mask.height());
  return out.str();
}

std::string first_sentence(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n')) {
      return std::string(text.substr(0, i + 1));
    }
  }
  return std::string(text);
}

namespace {

std::string describe_from_features(const FeatureVector& f, const ImageRecord& image,
                                   ForgeryDomain domain) {
  std::string kind = "natural-scene";
  if (f[kTextLikeness] > 0.3) kind = "document-like";
  else if (f[kFaceLikeness] > 0.2) kind = "portrait-like";
  else if (f[kMeanSaturation] < 0.1) kind = "low-saturation";
  std::ostringstream out;
  out << "A " << image.width() << "x" << image.height() << " " << kind
      << " image analyzed on the " << to_string(domain) << " track.";
  return out.str();
}

std::string cue_template(const ScheduleDecision& schedule, const DetectionResult& detection,
                         const FeatureVector& features, ForgeryDomain domain) {
  std::ostringstream out;
  if (schedule.artifact_score >= schedule.semantic_score) {
    const auto parts = artifact_contributions(features);
    static constexpr std::size_t kCueFeature[3] = {kNoiseResidualVar, kBlockiness, kHighFreqRatio};
    std::array<std::size_t, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return parts[a] > parts[b]; });
    out << "Judgment based on low-level visual cues: " << feature_name(kCueFeature[order[0]])
        << " and " << feature_name(kCueFeature[order[1]]) << " (artifact score "
        << format_fixed(schedule.artifact_score, 4) << ").";
  } else {
    out << "Judgment based on high-level semantic inconsistencies (semantic score "
        << format_fixed(schedule.semantic_score, 4) << ") assessed for the " << to_string(domain)
        << " track.";
  }
  out << " The " << detection.detector_id << " detector reported " << to_string(detection.verdict)
      << " with confidence " << format_fixed(detection.confidence, 4) << ".";
  return out.str();
}

}  // namespace

ForensicReport assemble_report(const RoutingDecision& routing, const ScheduleDecision& schedule,
                               const DetectionResult& detection, const ImageRecord& image) {
  const auto features = extract_features(image);
  ForensicReport r;
  r.detection = {detection.verdict, detection.confidence, routing.domain, schedule.tool_class,
                 detection.detector_id};
  const bool has_explanation = detection.explanation && !detection.explanation->empty();
  r.description = has_explanation ? first_sentence(*detection.explanation)
                                  : describe_from_features(features, image, routing.domain);
  if (requires_localization(routing.domain) && detection.verdict == Verdict::FAKE && detection.mask) {
    r.localization = ReportLocalization{*detection.mask, summarize_region(*detection.mask)};
  }
  r.judgment_basis = has_explanation ? *detection.explanation
                                     : cue_template(schedule, detection, features, routing.domain);
  return r;
}

json report_to_json(const ForensicReport& report) {
  json j;
  j["description"] = report.description;
  j["detection"] = {{"verdict", to_string(report.detection.verdict)},
                    {"confidence", report.detection.confidence},
                    {"domain", to_string(report.detection.domain)},
                    {"tool_class", to_string(report.detection.tool_class)},
                    {"detector_id", report.detection.detector_id}};
  if (report.localization) {
    j["localization"] = {{"mask_rle", encode_mask_rle(report.localization->mask)},
                         {"region_summary", report.localization->region_summary}};
  } else {
    j["localization"] = nullptr;
  }
  j["judgment_basis"] = report.judgment_basis;
  return j;
}

std::string report_to_markdown(const ForensicReport& report) {
  std::ostringstream out;
  out << "# Forensic report\n\n## Description\n\n" << report.description << "\n\n## Detection\n\n"
      << "- Verdict: **" << to_string(report.detection.verdict) << "**\n"
      << "- Confidence: " << format_fixed(report.detection.confidence, 4) << "\n"
      << "- Track: " << to_string(report.detection.domain) << "\n"
      << "- Tool class: " << to_string(report.detection.tool_class) << "\n"
      << "- Detector: " << report.detection.detector_id << "\n\n## Localization\n\n";
  if (report.localization) {
    out << report.localization->region_summary << "\n\nMask (RLE): `"
        << encode_mask_rle(report.localization->mask) << "`\n";
  } else {
    out << "Not applicable.\n";
  }
  out << "\n## Judgment basis\n\n" << report.judgment_basis << "\n";
  return out.str();
}

std::string validate_report_json(const json& j) {
  if (!j.is_object()) return "report must be an object";
  for (const char* key : {"description", "judgment_basis"}) {
    if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty()) {
      return std::string(key) + " must be a non-empty string";
    }
  }
  if (!j.contains("detection") || !j["detection"].is_object()) return "detection must be an object";
  const auto& d = j["detection"];
  if (!d.contains("verdict") || !d["verdict"].is_string() || !parse_verdict(d["verdict"].get<std::string>())) {
    return "detection.verdict invalid";
  }
  if (!d.contains("confidence") || !d["confidence"].is_number()) return "detection.confidence invalid";
  const double c = d["confidence"].get<double>();
  if (c < 0.0 || c > 1.0) return "detection.confidence outside [0,1]";
  if (!d.contains("domain") || !d["domain"].is_string() || !parse_domain(d["domain"].get<std::string>())) {
    return "detection.domain invalid";
  }
  if (!d.contains("tool_class") || !d["tool_class"].is_string() ||
      !parse_tool_class(d["tool_class"].get<std::string>())) {
    return "detection.tool_class invalid";
  }
  if (!d.contains("detector_id") || !d["detector_id"].is_string() ||
      d["detector_id"].get<std::string>().empty()) {
    return "detection.detector_id invalid";
  }
  if (!j.contains("localization")) return "localization key missing";
  const auto& loc = j["localization"];
  const auto domain = *parse_domain(d["domain"].get<std::string>());
  const bool fake = d["verdict"] == "FAKE";
  if (loc.is_null()) return {};
  if (!loc.is_object()) return "localization must be an object or null";
  if (!requires_localization(domain) || !fake) return "localization present outside IMDL/DMDL FAKE";
  if (!loc.contains("mask_rle") || !loc["mask_rle"].is_string()) return "localization.mask_rle invalid";
  try {
    decode_mask_rle(loc["mask_rle"].get<std::string>());
  } catch (const Error& e) {
    return std::string("localization.mask_rle: ") + e.what();
  }
  if (!loc.contains("region_summary") || !loc["region_summary"].is_string()) {
    return "localization.region_summary invalid";
  }
  return {};
}

ForensicReport Summarizer::summarize(const RoutingDecision& routing, const ScheduleDecision& schedule,
                                     const DetectionResult& detection, const ImageRecord& image,
                                     std::vector<std::string>* warnings) const {
  if (adapter_) return summarize_external(routing, schedule, detection, image, warnings);
  return assemble_report(routing, schedule, detection, image);
}

ForensicReport Summarizer::summarize_external(const RoutingDecision& routing,
                                              const ScheduleDecision& schedule,
                                              const DetectionResult& detection,
                                              const ImageRecord& image,
                                              std::vector<std::string>* warnings) const {
  if (!adapter_) throw Error(ErrorCode::AdapterUnavailable, "no summarizer adapter registered");
  auto report = assemble_report(routing, schedule, detection, image);
  AdapterRequest req;
  req.request_id = "summarize:" + image.id();
  req.task = AdapterTask::Summarize;
  req.image = &image;
  req.domain = routing.domain;
  req.hints = json{{"prompt", kSummarizerPrompt},
                   {"prompt_version", kSummarizerPromptVersion},
                   {"template_report", report_to_json(report)}};
  try {
    const auto reply = parse_reply(adapter_->call(req, timeout_), req);
    const auto& text = *reply.text;
    if (text.empty()) throw Error(ErrorCode::ProtocolViolation, "summarizer returned empty text");
    report.description = first_sentence(text);
    report.judgment_basis = text;
  } catch (const Error& e) {
    if (!fallback_) throw;
    if (warnings) {
      warnings->push_back("summarizer adapter failed (" + std::string(to_string(e.code())) +
                          "); using template report");
    }
  }
  return report;
}

std::string report_to_json_text(const ForensicReport& report) { return report_to_json(report).dump(2) + "\n"; }

}  // namespace unishield
