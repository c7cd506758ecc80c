#include "cli.hpp"

#include <csignal>
#include <fstream>
#include <ostream>
#include <pthread.h>
#include <thread>

#include "CLI11.hpp"
#include "unishield/ensemble.hpp"
#include "unishield/error.hpp"
#include "unishield/evaluate.hpp"
#include "unishield/features.hpp"
#include "unishield/grpo.hpp"
#include "unishield/image_io.hpp"
#include "unishield/service.hpp"
#include "unishield/synthetic.hpp"

namespace unishield {

namespace {

using nlohmann::json;

EnsembleMode mode_or_default(const std::string& token, const PipelineConfig& config) {
  const auto& t = token.empty() ? config.default_mode : token;
  if (auto m = parse_ensemble_mode(t)) return *m;
  throw Error(ErrorCode::ConfigError, "unknown mode '" + t + "'");
}

const std::vector<std::string> kModeTokens = {"full", "always-llm", "always-nonllm", "any", "majority"};

int cmd_detect(const std::string& image_path, const std::string& mode_token,
               const std::string& report_path, const std::string& markdown_path, bool trace,
               const PipelineConfig& config, std::ostream& out) {
  const auto mode = mode_or_default(mode_token, config);
  const auto pipeline = build_pipeline(config);
  const auto bytes = read_file(image_path);
  const auto image = ImageRecord::decode(content_id(bytes), bytes);
  auto outcome = run_ensemble(mode, image, pipeline);

  std::string text;
  if (outcome.run) {
    text = report_to_json_text(outcome.run->report);
    if (!markdown_path.empty()) write_file(markdown_path, report_to_markdown(outcome.run->report));
    if (trace) {
      json t = run_trace_to_json(*outcome.run);
      out << t.dump() << "\n";
    }
  } else {
    json j{{"mode", to_cli_token(mode)},
           {"verdict", to_string(outcome.result.verdict)},
           {"confidence", outcome.result.confidence},
           {"detector_id", outcome.result.detector_id},
           {"routed_domain",
            outcome.routing ? json(to_string(outcome.routing->domain)) : json(nullptr)},
           {"detector_calls", outcome.detector_calls}};
    text = j.dump(2) + "\n";
  }
  if (report_path.empty()) {
    out << text;
  } else {
    write_file(report_path, text);
  }
  return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& mode_token,
                 const std::string& out_dir, const std::string& split, int max_in_flight,
                 const PipelineConfig& config, std::ostream& out) {
  const auto mode = mode_or_default(mode_token, config);
  const auto manifest = read_manifest(manifest_path);
  const auto pipeline = build_pipeline(config);
  EvalOptions options;
  options.max_in_flight = max_in_flight > 0 ? max_in_flight : config.max_in_flight;
  options.threshold = config.threshold;
  if (!split.empty()) options.split = split;
  const auto report = evaluate(manifest, mode, pipeline, options);
  const auto table = report.summary_table();
  out << table;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(std::filesystem::path(out_dir) / "summary.json", report.summary_json().dump(2) + "\n");
    write_file(std::filesystem::path(out_dir) / "summary.txt", table);
    std::string lines;
    for (const auto& t : report.trace) lines += t.dump() + "\n";
    write_file(std::filesystem::path(out_dir) / "trace.jsonl", lines);
  }
  return 0;
}

int cmd_train(const std::string& manifest_path, const TrainerConfig& tc, const std::string& split,
              const std::string& out_path, const std::string& log_path, std::ostream& out) {
  tc.validate();
  const auto manifest = read_manifest(manifest_path);
  std::vector<RoutingExample> examples;
  for (const auto& e : manifest) {
    if (!split.empty() && e.split != split) continue;
    examples.push_back({extract_features(load_entry_image(e)), e.gt_domain});
  }
  if (examples.empty()) throw Error(ErrorCode::EmptyInput, "no training entries in " + manifest_path);
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path);
    if (!log) throw Error(ErrorCode::IoError, "cannot write " + log_path);
  }
  std::ostream& log_out = log_path.empty() ? out : log;
  const auto result = train_router(examples, tc, [&](const StepLog& s) {
    log_out << step_log_to_json(s).dump() << "\n";
  });
  const auto policy_text = policy_to_json(result.policy).dump(2) + "\n";
  if (out_path.empty()) {
    out << policy_text;
  } else {
    write_file(out_path, policy_text);
  }
  return 0;
}

int cmd_serve(int port, const std::string& host, const PipelineConfig& config, std::ostream& out) {
  const auto pipeline = build_pipeline(config);
  ServiceOptions options;
  options.host = host;
  options.port = port >= 0 ? port : config.port;
  options.max_concurrency = config.service_threads;

  // SIGINT/SIGTERM are handled by a dedicated thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(pipeline, options);
  const int bound = service.bind();
  out << "listening on http://" << host << ":" << bound << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.serve();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  out << "stopped" << std::endl;
  return 0;
}

int cmd_list_tools(const PipelineConfig& config, std::ostream& out) {
  const auto pipeline = build_pipeline(config);
  out << tools_listing(pipeline).body;
  return 0;
}

int cmd_synth(const std::string& dir, std::size_t n, std::uint64_t seed, const std::string& cue,
              const std::string& split, int size, bool append, std::ostream& out) {
  CueMix mix = CueMix::NONE;
  if (cue == "semantic") mix = CueMix::SEMANTIC;
  else if (cue == "artifact") mix = CueMix::ARTIFACT;
  else if (cue == "mixed") mix = CueMix::MIXED;
  const auto samples = generate_set(n, seed, mix, size, split + "-" + std::to_string(seed));
  const auto entries = write_synthetic(dir, samples, split, append);
  out << "wrote " << entries.size() << " images to " << dir << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Forgery detection orchestrator", "unishield"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (UNISHIELD_CONFIG overrides)");

  std::string image, mode, report, markdown;
  bool trace = false;
  auto* detect = app.add_subcommand("detect", "Analyze one image");
  detect->add_option("image", image, "PNG or JPEG file")->required();
  detect->add_option("--mode", mode, "full, always-llm, always-nonllm, any or majority")
      ->check(CLI::IsMember(kModeTokens));
  detect->add_option("--report", report, "Write the report here instead of stdout");
  detect->add_option("--markdown", markdown, "Also write a Markdown rendering (full mode)");
  detect->add_flag("--trace", trace, "Print the stage trace as one JSON line");

  std::string manifest, out_dir, split;
  int max_in_flight = 0;
  auto* eval = app.add_subcommand("evaluate", "Score a strategy on a labeled manifest");
  eval->add_option("manifest", manifest, "JSON-lines manifest")->required();
  eval->add_option("--mode", mode, "full, always-llm, always-nonllm, any or majority")
      ->check(CLI::IsMember(kModeTokens));
  eval->add_option("--out", out_dir, "Directory for summary.json, summary.txt and trace.jsonl");
  eval->add_option("--split", split, "Only entries of this split");
  eval->add_option("--max-in-flight", max_in_flight, "Concurrent images")->check(CLI::PositiveNumber);

  TrainerConfig tc;
  std::string policy_out, log_path, train_split;
  auto* train = app.add_subcommand("train-router", "Fit the routing policy with GRPO");
  train->add_option("manifest", manifest, "JSON-lines manifest")->required();
  train->add_option("--steps", tc.steps)->check(CLI::PositiveNumber);
  train->add_option("--beta", tc.beta)->check(CLI::NonNegativeNumber);
  train->add_option("--group-size", tc.group_size)->check(CLI::Range(2, 1 << 20));
  train->add_option("--seed", tc.seed);
  train->add_option("--lr", tc.learning_rate)->check(CLI::PositiveNumber);
  train->add_option("--batch", tc.batch_queries, "Queries per step")->check(CLI::PositiveNumber);
  train->add_option("--split", train_split, "Only entries of this split");
  train->add_option("--out", policy_out, "Policy JSON (stdout when omitted)");
  train->add_option("--log", log_path, "JSON-lines step log (stdout when omitted)");

  int port = -1;
  std::string host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--port", port, "0 picks a free port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host);

  auto* list = app.add_subcommand("list-tools", "Print the detector registry");

  std::string synth_dir, cue = "none", synth_split = "test";
  std::size_t n = 200;
  std::uint64_t seed = 1;
  int size = 32;
  bool append = false;
  auto* synth = app.add_subcommand("synth", "Write a procedural fixture set");
  synth->add_option("dir", synth_dir)->required();
  synth->add_option("-n,--count", n);
  synth->add_option("--seed", seed);
  synth->add_option("--cue", cue)->check(CLI::IsMember({"none", "semantic", "artifact", "mixed"}));
  synth->add_option("--split", synth_split);
  synth->add_option("--size", size)->check(CLI::Range(16, 1024));
  synth->add_flag("--append", append);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_dir, n, seed, cue, synth_split, size, append, out);
    if (train->parsed()) return cmd_train(manifest, tc, train_split, policy_out, log_path, out);
    std::optional<std::filesystem::path> cfg_path;
    if (!config_path.empty()) cfg_path = config_path;
    const auto config = resolve_config(cfg_path);
    if (detect->parsed()) return cmd_detect(image, mode, report, markdown, trace, config, out);
    if (eval->parsed()) return cmd_evaluate(manifest, mode, out_dir, split, max_in_flight, config, out);
    if (serve->parsed()) return cmd_serve(port, host, config, out);
    if (list->parsed()) return cmd_list_tools(config, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code());
    if (e.stage() != Stage::kNone) err << " [" << to_string(e.stage()) << "]";
    err << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace unishield
