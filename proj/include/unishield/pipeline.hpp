#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "unishield/report.hpp"
#include "unishield/router.hpp"
#include "unishield/scheduler.hpp"
#include "unishield/toolbox.hpp"

namespace unishield {

struct StageTimings {
  double route_ms = 0.0;
  double schedule_ms = 0.0;
  double detect_ms = 0.0;
  double report_ms = 0.0;
};

/// Everything one end-to-end analysis produced.
struct PipelineRun {
  std::string image_id;
  FeatureVector features;
  RoutingDecision routing;
  ScheduleDecision schedule;
  DetectorDescriptor detector;
  DetectionResult detection;
  ForensicReport report;
  std::vector<std::string> warnings;
  StageTimings timings;
};

nlohmann::json run_trace_to_json(const PipelineRun& run);

struct PipelineOptions {
  RoutingSource router_mode = RoutingSource::POLICY;
  ScheduleSource scheduler_mode = ScheduleSource::HEURISTIC;
};

/// route -> schedule -> lookup -> detect -> report, strictly in that order
/// and with exactly one detector call. Errors are rethrown tagged with the
/// stage that raised them. Immutable once built; run() is reentrant.
class Pipeline {
 public:
  Pipeline(Router router, Scheduler scheduler, Toolbox toolbox, Summarizer summarizer = {},
           PipelineOptions options = {})
      : router_(std::move(router)),
        scheduler_(std::move(scheduler)),
        toolbox_(std::move(toolbox)),
        summarizer_(std::move(summarizer)),
        options_(options) {}

  PipelineRun run(const ImageRecord& image,
                  const std::optional<GroundTruthHint>& hint = std::nullopt) const;

  /// Routing stage alone (used by the Always-X baselines).
  RoutingDecision route(const ImageRecord& image) const;

  const Router& router() const { return router_; }
  const Scheduler& scheduler() const { return scheduler_; }
  const Toolbox& toolbox() const { return toolbox_; }
  Toolbox& mutable_toolbox() { return toolbox_; }
  const PipelineOptions& options() const { return options_; }

 private:
  Router router_;
  Scheduler scheduler_;
  Toolbox toolbox_;
  Summarizer summarizer_;
  PipelineOptions options_;
};

/// External adapter endpoint for the router, scheduler or summarizer.
struct AdapterSpec {
  TransportKind transport = TransportKind::SUBPROCESS_STDIO;
  std::string endpoint;
  int timeout_ms = 30000;
};

struct DetectorEntry {
  DetectorDescriptor descriptor;
  std::optional<StubProfile> stub;
};

/// Parsed configuration file (JSON). Relative paths resolve against the
/// file's directory.
struct PipelineConfig {
  std::optional<std::filesystem::path> policy_path;
  std::optional<RoutingPolicy> policy;
  RoutingSource router_mode = RoutingSource::POLICY;
  std::optional<AdapterSpec> router_adapter;
  ScheduleSource scheduler_mode = ScheduleSource::HEURISTIC;
  HeuristicConfig heuristic;
  std::optional<AdapterSpec> scheduler_adapter;
  std::optional<AdapterSpec> summarizer_adapter;
  bool summarizer_fallback = true;
  std::vector<DetectorEntry> detectors;  // empty -> the default eight stubs
  StubProfile default_stub{0.9, 0.1, 0, MaskStyle::NONE, {}};
  double threshold = 0.5;
  std::string default_mode = "full";
  int max_in_flight = 4;
  int port = 8080;
  int service_threads = 8;
};

/// Environment variable that overrides the config path.
inline constexpr const char* kConfigEnvVar = "UNISHIELD_CONFIG";

PipelineConfig config_from_json(const nlohmann::json& j,
                                const std::filesystem::path& base_dir = {});
/// Throws Error{ConfigError} / Error{IoError}.
PipelineConfig load_config(const std::filesystem::path& path);

/// Resolves the config path: UNISHIELD_CONFIG wins over `cli_path`; with
/// neither, the built-in defaults apply.
PipelineConfig resolve_config(const std::optional<std::filesystem::path>& cli_path);

std::shared_ptr<Transport> make_transport(const AdapterSpec& spec);

Pipeline build_pipeline(const PipelineConfig& config);

}  // namespace unishield
