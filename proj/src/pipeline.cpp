#include "unishield/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>

#include "unishield/error.hpp"
#include "unishield/image_io.hpp"
#include "unishield/rle.hpp"

namespace unishield {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

template <typename F>
auto in_stage(Stage stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.stage() != Stage::kNone) throw;
    throw e.with_stage(stage);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::AdapterError, e.what()).with_stage(stage);
  }
}

}  // namespace

RoutingDecision Pipeline::route(const ImageRecord& image) const {
  return in_stage(Stage::kRoute, [&] { return router_.route(image, options_.router_mode); });
}

PipelineRun Pipeline::run(const ImageRecord& image, const std::optional<GroundTruthHint>& hint) const {
  PipelineRun run;
  run.image_id = image.id();

  auto t = Clock::now();
  run.routing = in_stage(Stage::kRoute, [&] {
    run.features = extract_features(image);
    return router_.route(image, run.features, options_.router_mode);
  });
  run.timings.route_ms = ms_since(t);

  t = Clock::now();
  run.schedule = in_stage(Stage::kSchedule, [&] {
    return options_.scheduler_mode == ScheduleSource::EXTERNAL_ADAPTER
               ? scheduler_.schedule_external(image)
               : scheduler_.schedule(run.features);
  });
  run.timings.schedule_ms = ms_since(t);

  t = Clock::now();
  run.detection = in_stage(Stage::kToolbox, [&] {
    run.detector = toolbox_.lookup(run.routing.domain, run.schedule.tool_class);
    return toolbox_.detect(run.detector, image, hint);
  });
  run.timings.detect_ms = ms_since(t);

  t = Clock::now();
  run.report = in_stage(Stage::kReport, [&] {
    return summarizer_.summarize(run.routing, run.schedule, run.detection, image, &run.warnings);
  });
  run.timings.report_ms = ms_since(t);
  return run;
}

json run_trace_to_json(const PipelineRun& run) {
  json routing{{"domain", to_string(run.routing.domain)},
               {"probabilities", run.routing.probabilities},
               {"source", to_string(run.routing.source)}};
  if (run.routing.raw_text) routing["raw_text"] = *run.routing.raw_text;
  return json{{"image_id", run.image_id},
              {"features", run.features.values},
              {"routing", routing},
              {"schedule",
               {{"tool_class", to_string(run.schedule.tool_class)},
                {"semantic_score", run.schedule.semantic_score},
                {"artifact_score", run.schedule.artifact_score},
                {"source", to_string(run.schedule.source)},
                {"rationale", run.schedule.rationale}}},
              {"detector_id", run.detector.detector_id},
              {"detection",
               {{"verdict", to_string(run.detection.verdict)},
                {"confidence", run.detection.confidence},
                {"mask_rle", run.detection.mask ? json(encode_mask_rle(*run.detection.mask)) : json(nullptr)},
                {"latency_ms", run.detection.latency_ms}}},
              {"warnings", run.warnings},
              {"timings_ms",
               {{"route", run.timings.route_ms},
                {"schedule", run.timings.schedule_ms},
                {"detect", run.timings.detect_ms},
                {"report", run.timings.report_ms}}}};
}

namespace {

[[noreturn]] void config_error(const std::string& why) {
  throw Error(ErrorCode::ConfigError, "config: " + why);
}

AdapterSpec adapter_spec_from_json(const json& j) {
  AdapterSpec s;
  const auto kind = parse_transport_kind(j.value("transport", std::string("SUBPROCESS_STDIO")));
  if (!kind || *kind == TransportKind::IN_PROCESS_STUB) config_error("adapter transport must be SUBPROCESS_STDIO or HTTP");
  s.transport = *kind;
  s.endpoint = j.at("endpoint").get<std::string>();
  s.timeout_ms = j.value("timeout_ms", 30000);
  if (s.endpoint.empty() || s.timeout_ms <= 0) config_error("adapter needs an endpoint and a positive timeout");
  return s;
}

}  // namespace

PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  try {
    if (!j.is_object()) config_error("top level must be an object");
    if (auto r = j.find("router"); r != j.end()) {
      const auto mode = r->value("mode", std::string("policy"));
      if (mode == "policy") c.router_mode = RoutingSource::POLICY;
      else if (mode == "external") c.router_mode = RoutingSource::EXTERNAL_ADAPTER;
      else config_error("router.mode must be policy or external");
      if (r->contains("policy_path")) {
        std::filesystem::path p = r->at("policy_path").get<std::string>();
        c.policy_path = p.is_absolute() ? p : base_dir / p;
      }
      if (r->contains("adapter")) c.router_adapter = adapter_spec_from_json(r->at("adapter"));
    }
    if (auto s = j.find("scheduler"); s != j.end()) {
      const auto mode = s->value("mode", std::string("heuristic"));
      if (mode == "heuristic") c.scheduler_mode = ScheduleSource::HEURISTIC;
      else if (mode == "external") c.scheduler_mode = ScheduleSource::EXTERNAL_ADAPTER;
      else config_error("scheduler.mode must be heuristic or external");
      c.heuristic.noise_weight = s->value("noise_weight", c.heuristic.noise_weight);
      c.heuristic.blockiness_weight = s->value("blockiness_weight", c.heuristic.blockiness_weight);
      c.heuristic.high_freq_weight = s->value("high_freq_weight", c.heuristic.high_freq_weight);
      c.heuristic.noise_cap = s->value("noise_cap", c.heuristic.noise_cap);
      c.heuristic.blockiness_cap = s->value("blockiness_cap", c.heuristic.blockiness_cap);
      if (!(c.heuristic.noise_cap > 0.0) || !(c.heuristic.blockiness_cap > 0.0)) {
        config_error("scheduler caps must be positive");
      }
      if (s->contains("adapter")) c.scheduler_adapter = adapter_spec_from_json(s->at("adapter"));
    }
    if (auto s = j.find("summarizer"); s != j.end()) {
      const auto mode = s->value("mode", std::string("template"));
      if (mode == "external") {
        if (!s->contains("adapter")) config_error("summarizer.mode external needs an adapter");
        c.summarizer_adapter = adapter_spec_from_json(s->at("adapter"));
      } else if (mode != "template") {
        config_error("summarizer.mode must be template or external");
      }
      c.summarizer_fallback = s->value("fallback", true);
    }
    if (auto d = j.find("default_stub"); d != j.end()) c.default_stub = stub_profile_from_json(*d);
    if (auto d = j.find("detectors"); d != j.end()) {
      for (const auto& entry : *d) {
        DetectorEntry e;
        e.descriptor = descriptor_from_json(entry);
        if (entry.contains("stub")) e.stub = stub_profile_from_json(entry.at("stub"));
        c.detectors.push_back(std::move(e));
      }
    }
    c.threshold = j.value("threshold", c.threshold);
    if (!(c.threshold > 0.0 && c.threshold < 1.0)) config_error("threshold must lie in (0,1)");
    c.default_mode = j.value("mode", c.default_mode);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    if (c.max_in_flight < 1) config_error("max_in_flight must be >= 1");
    if (auto s = j.find("service"); s != j.end()) {
      c.port = s->value("port", c.port);
      c.service_threads = s->value("max_concurrency", c.service_threads);
    }
  } catch (const json::exception& e) {
    config_error(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    config_error(e.what());
  }
  if (c.router_mode == RoutingSource::EXTERNAL_ADAPTER && !c.router_adapter) {
    config_error("router.mode external needs router.adapter");
  }
  if (c.scheduler_mode == ScheduleSource::EXTERNAL_ADAPTER && !c.scheduler_adapter) {
    config_error("scheduler.mode external needs scheduler.adapter");
  }
  if (c.policy_path) {
    std::ifstream in(*c.policy_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open policy " + c.policy_path->string());
    try {
      c.policy = policy_from_json(json::parse(in));
    } catch (const json::exception& e) {
      config_error(std::string("policy file: ") + e.what());
    }
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

PipelineConfig resolve_config(const std::optional<std::filesystem::path>& cli_path) {
  if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') {
    return load_config(env);
  }
  if (cli_path) return load_config(*cli_path);
  return PipelineConfig{};
}

std::shared_ptr<Transport> make_transport(const AdapterSpec& spec) {
  if (spec.transport == TransportKind::HTTP) return std::make_shared<HttpTransport>(spec.endpoint);
  return std::make_shared<StdioTransport>(spec.endpoint);
}

Pipeline build_pipeline(const PipelineConfig& config) {
  Router router(config.policy.value_or(RoutingPolicy::zeros()));
  if (config.router_adapter) {
    router.set_adapter(make_transport(*config.router_adapter),
                       std::chrono::milliseconds(config.router_adapter->timeout_ms));
  }
  Scheduler scheduler(config.heuristic);
  if (config.scheduler_adapter) {
    scheduler.set_adapter(make_transport(*config.scheduler_adapter),
                          std::chrono::milliseconds(config.scheduler_adapter->timeout_ms));
  }
  Summarizer summarizer;
  if (config.summarizer_adapter) {
    summarizer.set_adapter(make_transport(*config.summarizer_adapter),
                           std::chrono::milliseconds(config.summarizer_adapter->timeout_ms),
                           config.summarizer_fallback);
  }
  Toolbox toolbox;
  if (config.detectors.empty()) {
    toolbox = Toolbox::with_defaults(config.default_stub);
  } else {
    std::uint64_t salt = config.default_stub.seed_salt;
    for (const auto& e : config.detectors) {
      auto stub = e.stub;
      if (!stub) {
        stub = config.default_stub;
        stub->seed_salt = salt;
      }
      ++salt;
      toolbox.add(e.descriptor, stub);
    }
  }
  return Pipeline(std::move(router), std::move(scheduler), std::move(toolbox), std::move(summarizer),
                  PipelineOptions{config.router_mode, config.scheduler_mode});
}

}  // namespace unishield
