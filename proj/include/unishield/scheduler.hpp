#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>

#include "unishield/features.hpp"
#include "unishield/transport.hpp"
#include "unishield/types.hpp"

namespace unishield {

enum class ScheduleSource { HEURISTIC, EXTERNAL_ADAPTER };
std::string_view to_string(ScheduleSource s);

struct ScheduleDecision {
  ToolClass tool_class = ToolClass::NON_LLM_BASED;
  double semantic_score = 0.0;
  double artifact_score = 0.0;
  ScheduleSource source = ScheduleSource::HEURISTIC;
  std::string rationale;
};

// Local two-score rule. Noise residual and blockiness are divided by their
// caps (and clamped to 1) before weighting.
struct HeuristicConfig {
  double noise_weight = 0.5;
  double blockiness_weight = 0.3;
  double high_freq_weight = 0.2;
  double noise_cap = 400.0;
  double blockiness_cap = 8.0;
};

/// Per-cue contributions to artifact_score, in schema order of
/// (noise residual, blockiness, high-frequency energy).
std::array<double, 3> artifact_contributions(const FeatureVector& features,
                                             const HeuristicConfig& config = {});

/// LLM_BASED iff semantic_score > artifact_score. Throws Error{DimensionMismatch}.
ScheduleDecision schedule_heuristic(const FeatureVector& features,
                                    const HeuristicConfig& config = {});

inline constexpr std::string_view kSchedulerPromptVersion = "scheduler-prompt/1";
extern const std::string_view kSchedulerPrompt;

/// Parses "<answer>LLM</answer>" / "<answer>NONLLM</answer>" (trimmed,
/// case-folded). Throws Error{MissingAnswerTag} or Error{UnknownLabel}.
ToolClass parse_schedule_answer(std::string_view text);

class Scheduler {
 public:
  explicit Scheduler(HeuristicConfig config = {}) : config_(config) {}

  void set_adapter(std::shared_ptr<Transport> adapter, std::chrono::milliseconds timeout) {
    adapter_ = std::move(adapter);
    timeout_ = timeout;
  }
  bool has_adapter() const { return adapter_ != nullptr; }
  const HeuristicConfig& config() const { return config_; }

  ScheduleDecision schedule(const FeatureVector& features) const {
    return schedule_heuristic(features, config_);
  }

  /// Throws Error{AdapterUnavailable} when no adapter is registered.
  ScheduleDecision schedule_external(const ImageRecord& image) const;

 private:
  HeuristicConfig config_;
  std::shared_ptr<Transport> adapter_;
  std::chrono::milliseconds timeout_{30000};
};

}  // namespace unishield
