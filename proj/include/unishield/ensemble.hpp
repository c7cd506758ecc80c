#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "unishield/pipeline.hpp"

namespace unishield {

enum class EnsembleMode { ANY_VOTE, MAJORITY_VOTE, ALWAYS_LLM, ALWAYS_NON_LLM, FULL };

/// CLI tokens: any, majority, always-llm, always-nonllm, full.
std::string_view to_cli_token(EnsembleMode mode);
std::optional<EnsembleMode> parse_ensemble_mode(std::string_view token);

/// FAKE iff at least one member says FAKE. Throws Error{EmptyInput}.
Verdict any_vote(std::span<const DetectionResult> results);

/// FAKE iff FAKE votes are at least half of the members (ties count as FAKE).
/// Throws Error{EmptyInput}.
Verdict majority_vote(std::span<const DetectionResult> results);

struct EnsembleOutcome {
  DetectionResult result;
  std::optional<RoutingDecision> routing;
  std::optional<PipelineRun> run;  // FULL mode only
  std::size_t detector_calls = 0;
};

/// Runs one image through the selected strategy. Voting modes call every
/// registered detector (aggregated confidence: max for ANY_VOTE, mean for
/// MAJORITY_VOTE). ALWAYS_* route (unless `routing` is given) and call the
/// routed track's detector of the fixed class. FULL runs the pipeline.
EnsembleOutcome run_ensemble(EnsembleMode mode, const ImageRecord& image, const Pipeline& pipeline,
                             const std::optional<RoutingDecision>& routing = std::nullopt,
                             const std::optional<GroundTruthHint>& hint = std::nullopt);

}  // namespace unishield
