#include "unishield/ensemble.hpp"

#include <algorithm>

#include "unishield/error.hpp"

namespace unishield {

std::string_view to_cli_token(EnsembleMode mode) {
  switch (mode) {
    case EnsembleMode::ANY_VOTE: return "any";
    case EnsembleMode::MAJORITY_VOTE: return "majority";
    case EnsembleMode::ALWAYS_LLM: return "always-llm";
    case EnsembleMode::ALWAYS_NON_LLM: return "always-nonllm";
    case EnsembleMode::FULL: return "full";
  }
  return "full";
}

std::optional<EnsembleMode> parse_ensemble_mode(std::string_view token) {
  for (auto m : {EnsembleMode::ANY_VOTE, EnsembleMode::MAJORITY_VOTE, EnsembleMode::ALWAYS_LLM,
                 EnsembleMode::ALWAYS_NON_LLM, EnsembleMode::FULL}) {
    if (to_cli_token(m) == token) return m;
  }
  return std::nullopt;
}

namespace {
std::size_t fake_votes(std::span<const DetectionResult> results) {
  if (results.empty()) throw Error(ErrorCode::EmptyInput, "voting needs at least one result");
  return static_cast<std::size_t>(std::count_if(results.begin(), results.end(), [](const DetectionResult& r) {
    return r.verdict == Verdict::FAKE;
  }));
}
}  // namespace

Verdict any_vote(std::span<const DetectionResult> results) {
  return fake_votes(results) > 0 ? Verdict::FAKE : Verdict::REAL;
}

Verdict majority_vote(std::span<const DetectionResult> results) {
  return 2 * fake_votes(results) >= results.size() ? Verdict::FAKE : Verdict::REAL;
}

EnsembleOutcome run_ensemble(EnsembleMode mode, const ImageRecord& image, const Pipeline& pipeline,
                             const std::optional<RoutingDecision>& routing,
                             const std::optional<GroundTruthHint>& hint) {
  EnsembleOutcome out;
  const auto& toolbox = pipeline.toolbox();
  switch (mode) {
    case EnsembleMode::FULL: {
      auto run = pipeline.run(image, hint);
      out.result = run.detection;
      out.routing = run.routing;
      out.run = std::move(run);
      out.detector_calls = 1;
      return out;
    }
    case EnsembleMode::ALWAYS_LLM:
    case EnsembleMode::ALWAYS_NON_LLM: {
      out.routing = routing ? *routing : pipeline.route(image);
      const auto cls = mode == EnsembleMode::ALWAYS_LLM ? ToolClass::LLM_BASED : ToolClass::NON_LLM_BASED;
      try {
        const auto& d = toolbox.lookup(out.routing->domain, cls);
        out.result = toolbox.detect(d, image, hint);
      } catch (const Error& e) {
        throw e.with_stage(Stage::kToolbox);
      }
      out.detector_calls = 1;
      return out;
    }
    case EnsembleMode::ANY_VOTE:
    case EnsembleMode::MAJORITY_VOTE: {
      const auto members = toolbox.registry().list();
      if (members.empty()) throw Error(ErrorCode::EmptyInput, "no detectors registered").with_stage(Stage::kToolbox);
      std::vector<DetectionResult> results;
      results.reserve(members.size());
      try {
        for (const auto& d : members) results.push_back(toolbox.detect(d, image, hint));
      } catch (const Error& e) {
        throw e.with_stage(Stage::kToolbox);
      }
      out.detector_calls = results.size();
      const bool any = mode == EnsembleMode::ANY_VOTE;
      out.result.detector_id = any ? "any-vote" : "majority-vote";
      out.result.verdict = any ? any_vote(results) : majority_vote(results);
      double agg = 0.0;
      for (const auto& r : results) {
        agg = any ? std::max(agg, r.confidence) : agg + r.confidence;
        out.result.latency_ms += r.latency_ms;
      }
      out.result.confidence = any ? agg : agg / static_cast<double>(results.size());
      return out;
    }
  }
  return out;
}

}  // namespace unishield
