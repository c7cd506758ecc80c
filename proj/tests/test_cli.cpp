#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "unishield/evaluate.hpp"
#include "unishield/image_io.hpp"
#include "unishield/report.hpp"
#include "unishield/service.hpp"
#include "unishield/synthetic.hpp"

using namespace unishield;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "unishield");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    ::unsetenv(kConfigEnvVar);
    dir_ = fs::temp_directory_path() /
           ("unishield-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "-" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, DetectWritesTheServiceReport) {
  const auto s = generate_sample(ForgeryDomain::DMDL, Verdict::FAKE, SyntheticCue::NONE, 3, 32, "doc");
  const auto img = dir_ / "doc.png";
  write_file(img, s.image.bytes());
  const auto r = run({"detect", img.string(), "--report", (dir_ / "r.json").string(), "--markdown",
                      (dir_ / "r.md").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = slurp(dir_ / "r.json");
  EXPECT_EQ(validate_report_json(json::parse(text)), "");
  const auto bytes = read_file(img);
  EXPECT_EQ(text, analyze_image_bytes(build_pipeline(PipelineConfig{}), bytes).body);
  EXPECT_NE(slurp(dir_ / "r.md").find("## Judgment basis"), std::string::npos);

  const auto stdout_run = run({"detect", img.string()});
  EXPECT_EQ(stdout_run.code, 0);
  EXPECT_EQ(stdout_run.out, text);
}

TEST_F(Cli, DetectBaselineModes) {
  const auto img = dir_ / "a.png";
  write_file(img, generate_sample(ForgeryDomain::AIGCD, Verdict::REAL, SyntheticCue::NONE, 1).image.bytes());
  const auto r = run({"detect", img.string(), "--mode", "majority"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["mode"], "majority");
  EXPECT_EQ(j["detector_calls"], 8);
  EXPECT_EQ(run({"detect", img.string(), "--mode", "sometimes"}).code, 2);
}

TEST_F(Cli, ExitCodes) {
  auto r = run({"evaluate", (dir_ / "missing.jsonl").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("IoError"), std::string::npos) << r.err;
  EXPECT_EQ(run({"detect", "x.png", "--bogus"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
  const auto junk = dir_ / "junk.png";
  std::ofstream(junk) << "nope";
  r = run({"detect", junk.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("DecodeError"), std::string::npos) << r.err;
}

TEST_F(Cli, ListTools) {
  const auto r = run({"list-tools"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out)["tools"].size(), 8u);
}

TEST_F(Cli, SynthTrainEvaluate) {
  const auto data = dir_ / "data";
  ASSERT_EQ(run({"synth", data.string(), "-n", "160", "--seed", "1", "--split", "train"}).code, 0);
  ASSERT_EQ(run({"synth", data.string(), "-n", "40", "--seed", "2", "--split", "test", "--append"}).code, 0);
  EXPECT_EQ(read_manifest(data / "manifest.jsonl").size(), 200u);

  const auto policy = dir_ / "policy.json";
  auto r = run({"train-router", (data / "manifest.jsonl").string(), "--split", "train", "--steps", "300", "--lr",
                "0.1", "--seed", "5", "--out", policy.string(), "--log", (dir_ / "log.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NO_THROW(policy_from_json(json::parse(slurp(policy))));
  std::ifstream log(dir_ / "log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = json::parse(line);
    EXPECT_EQ(j.size(), 4u);
    EXPECT_EQ(j["step"], lines);
    ++lines;
  }
  EXPECT_EQ(lines, 300);

  std::ofstream(dir_ / "config.json") << json{{"router", {{"policy_path", "policy.json"}}}}.dump();
  const auto out = dir_ / "eval";
  r = run({"--config", (dir_ / "config.json").string(), "evaluate", (data / "manifest.jsonl").string(), "--split",
           "test", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(summary["metadata"]["n_entries"], 40);
  EXPECT_GE(summary["domains"]["ALL"]["routing_accuracy"].get<double>(), 0.9);
  EXPECT_NE(r.out.find("Route"), std::string::npos);
  EXPECT_EQ(slurp(out / "summary.txt"), r.out);
  std::ifstream trace(out / "trace.jsonl");
  lines = 0;
  while (std::getline(trace, line)) ++lines;
  EXPECT_EQ(lines, 40);
}

TEST_F(Cli, ConfigFromEnvironment) {
  std::ofstream(dir_ / "bad.json") << "{";
  ::setenv(kConfigEnvVar, (dir_ / "bad.json").c_str(), 1);
  const auto r = run({"list-tools"});
  ::unsetenv(kConfigEnvVar);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("ConfigError"), std::string::npos) << r.err;
}
