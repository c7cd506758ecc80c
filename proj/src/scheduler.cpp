#include "unishield/scheduler.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "unishield/error.hpp"
#include "unishield/router.hpp"

namespace unishield {

const std::string_view kSchedulerPrompt =
    "You are selecting a forgery detector for this image. Examine both its semantic "
    "structure and its low-level visual features. (1) If the image shows high-level "
    "semantic or logical inconsistencies, such as implausible object relationships, "
    "violations of common sense, or contradictory contextual elements, choose an "
    "LLM-based detector. (2) If it shows low-level visual artifacts such as texture "
    "discontinuities, edge anomalies, or compression traces, choose a non-LLM-based "
    "detector. Reply with <answer>LLM</answer> or <answer>NONLLM</answer>.";

std::string_view to_string(ScheduleSource s) {
  return s == ScheduleSource::HEURISTIC ? "HEURISTIC" : "EXTERNAL_ADAPTER";
}

std::array<double, 3> artifact_contributions(const FeatureVector& features,
                                             const HeuristicConfig& config) {
  if (features.size() != kNumFeatures) {
    throw Error(ErrorCode::DimensionMismatch, "scheduler expects the 8-feature schema");
  }
  const double noise = std::clamp(features[kNoiseResidualVar] / config.noise_cap, 0.0, 1.0);
  const double block = std::clamp(features[kBlockiness] / config.blockiness_cap, 0.0, 1.0);
  const double hf = std::clamp(features[kHighFreqRatio], 0.0, 1.0);
  return {config.noise_weight * noise, config.blockiness_weight * block,
          config.high_freq_weight * hf};
}

ScheduleDecision schedule_heuristic(const FeatureVector& features, const HeuristicConfig& config) {
  const auto parts = artifact_contributions(features, config);
  ScheduleDecision d;
  d.source = ScheduleSource::HEURISTIC;
  d.artifact_score = std::clamp(parts[0] + parts[1] + parts[2], 0.0, 1.0);
  d.semantic_score = 1.0 - d.artifact_score;
  d.tool_class = d.semantic_score > d.artifact_score ? ToolClass::LLM_BASED : ToolClass::NON_LLM_BASED;
  char buf[160];
  std::snprintf(buf, sizeof buf, "artifact score %.4f vs semantic score %.4f", d.artifact_score,
                d.semantic_score);
  d.rationale = buf;
  return d;
}

ToolClass parse_schedule_answer(std::string_view text) {
  auto content = extract_answer(text);
  for (auto& c : content) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (content == "LLM") return ToolClass::LLM_BASED;
  if (content == "NONLLM") return ToolClass::NON_LLM_BASED;
  throw Error(ErrorCode::UnknownLabel, "unknown scheduler label '" + content + "'", std::string(text));
}

ScheduleDecision Scheduler::schedule_external(const ImageRecord& image) const {
  if (!adapter_) throw Error(ErrorCode::AdapterUnavailable, "no scheduler adapter registered");
  AdapterRequest req;
  req.request_id = "schedule:" + image.id();
  req.task = AdapterTask::Schedule;
  req.image = &image;
  req.hints = nlohmann::json{{"prompt", kSchedulerPrompt},
                             {"prompt_version", kSchedulerPromptVersion}};
  const auto reply = parse_reply(adapter_->call(req, timeout_), req);
  ScheduleDecision d;
  d.source = ScheduleSource::EXTERNAL_ADAPTER;
  d.tool_class = parse_schedule_answer(*reply.text);
  const bool llm = d.tool_class == ToolClass::LLM_BASED;
  d.semantic_score = llm ? 1.0 : 0.0;
  d.artifact_score = llm ? 0.0 : 1.0;
  d.rationale = *reply.text;
  return d;
}

}  // namespace unishield
