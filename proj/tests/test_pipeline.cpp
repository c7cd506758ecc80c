#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "unishield/ensemble.hpp"
#include "unishield/pipeline.hpp"
#include "unishield/rle.hpp"
#include "unishield/synthetic.hpp"

using namespace unishield;
using namespace testing_support;
using nlohmann::json;

namespace {

RoutingPolicy biased_to(ForgeryDomain d) {
  auto p = RoutingPolicy::zeros();
  p.bias[index_of(d)] = 10.0;
  return p;
}

Toolbox stub_toolbox(const std::function<StubProfile(const DetectorDescriptor&)>& profile) {
  Toolbox tb;
  for (const auto& d : default_descriptors()) tb.add(d, profile(d));
  return tb;
}

std::size_t total_calls(const std::map<std::string, std::shared_ptr<CountingTransport>>& counters) {
  std::size_t n = 0;
  for (const auto& [id, c] : counters) n += c->calls(AdapterTask::Detect);
  return n;
}

DetectionResult vote(Verdict v) {
  DetectionResult r;
  r.verdict = v;
  return r;
}

}  // namespace

TEST(Pipeline, FakeImdlWithPerfectStubs) {
  const auto sample = generate_sample(ForgeryDomain::IMDL, Verdict::FAKE, SyntheticCue::NONE, 11, 32, "imdl-fake");
  StubProfile perfect{1.0, 0.0, 0, MaskStyle::GT_ECHO, {}};
  Pipeline p(Router(biased_to(ForgeryDomain::IMDL)), Scheduler{}, Toolbox::with_defaults(perfect));
  const auto run = p.run(sample.image, sample.hint());
  EXPECT_EQ(run.report.detection.verdict, Verdict::FAKE);
  EXPECT_EQ(run.report.detection.domain, ForgeryDomain::IMDL);
  ASSERT_TRUE(run.report.localization);
  EXPECT_EQ(run.report.localization->mask, *sample.mask);
  EXPECT_EQ(run.detector.detector_id, run.report.detection.detector_id);
  EXPECT_EQ(run.report.detection.tool_class, run.schedule.tool_class);
  const auto trace = run_trace_to_json(run);
  EXPECT_EQ(trace["image_id"], "imdl-fake");
  EXPECT_TRUE(trace.contains("timings_ms"));
}

TEST(Pipeline, MissingTrackDetectorIsAToolboxError) {
  Toolbox tb;
  for (const auto& d : default_descriptors()) {
    if (d.domain != ForgeryDomain::DMDL) tb.add(d, StubProfile{});
  }
  Pipeline p(Router(biased_to(ForgeryDomain::DMDL)), Scheduler{}, tb);
  try {
    p.run(solid(16, 16, 200, 200, 200));
    FAIL() << "expected NoDetectorForKey";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoDetectorForKey);
    EXPECT_EQ(e.stage(), Stage::kToolbox);
  }
}

TEST(Pipeline, AdapterFailuresCarryTheirStage) {
  Router router(RoutingPolicy::zeros());
  router.set_adapter(std::make_shared<FunctionTransport>([](const AdapterRequest& r) {
                       return text_reply(r, "no tags here");
                     }),
                     std::chrono::milliseconds(100));
  Pipeline p(router, Scheduler{}, Toolbox::with_defaults(), Summarizer{},
             PipelineOptions{RoutingSource::EXTERNAL_ADAPTER, ScheduleSource::HEURISTIC});
  try {
    p.run(solid(8, 8, 1, 2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingAnswerTag);
    EXPECT_EQ(e.stage(), Stage::kRoute);
  }
  Pipeline q(Router(RoutingPolicy::zeros()), Scheduler{}, Toolbox::with_defaults(), Summarizer{},
             PipelineOptions{RoutingSource::POLICY, ScheduleSource::EXTERNAL_ADAPTER});
  try {
    q.run(solid(8, 8, 1, 2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AdapterUnavailable);
    EXPECT_EQ(e.stage(), Stage::kSchedule);
  }
}

TEST(Pipeline, ExactlyOneDetectCallPerImage) {
  Pipeline p(Router(RoutingPolicy::zeros()), Scheduler{}, Toolbox::with_defaults());
  const auto counters = p.mutable_toolbox().instrument();
  const auto set = generate_set(120, 4, CueMix::MIXED);
  for (std::size_t i = 0; i < set.size(); ++i) {
    p.run(set[i].image, set[i].hint());
    ASSERT_EQ(total_calls(counters), i + 1);
  }
}

TEST(Pipeline, RunIsDeterministic) {
  Pipeline p(Router(RoutingPolicy::zeros()), Scheduler{}, Toolbox::with_defaults());
  for (const auto& s : generate_set(16, 9, CueMix::MIXED)) {
    EXPECT_EQ(p.run(s.image, s.hint()).report, p.run(s.image, s.hint()).report);
  }
}

TEST(Voting, Examples) {
  const auto F = Verdict::FAKE, R = Verdict::REAL;
  EXPECT_EQ(any_vote(std::vector{vote(F), vote(R), vote(R)}), F);
  EXPECT_EQ(any_vote(std::vector{vote(R), vote(R)}), R);
  EXPECT_ERROR_CODE(any_vote({}), ErrorCode::EmptyInput);
  EXPECT_EQ(majority_vote(std::vector{vote(F), vote(F), vote(R), vote(R)}), F);
  EXPECT_EQ(majority_vote(std::vector{vote(F), vote(R), vote(R), vote(R)}), R);
  EXPECT_EQ(majority_vote(std::vector{vote(F), vote(F), vote(F)}), F);
  EXPECT_ERROR_CODE(majority_vote({}), ErrorCode::EmptyInput);
}

TEST(Voting, MonotoneAndSymmetric) {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 500; ++t) {
    std::vector<DetectionResult> v(1 + rng() % 9);
    for (auto& r : v) r = vote(rng() % 2 ? Verdict::FAKE : Verdict::REAL);
    const auto any = any_vote(v), maj = majority_vote(v);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(majority_vote(v), maj);
    v.push_back(vote(Verdict::FAKE));
    if (any == Verdict::FAKE) EXPECT_EQ(any_vote(v), Verdict::FAKE);
    if (maj == Verdict::FAKE) EXPECT_EQ(majority_vote(v), Verdict::FAKE);
  }
}

TEST(Ensemble, AlwaysLlmOnImdlCallsFakeshieldOnce) {
  Pipeline p(Router(RoutingPolicy::zeros()), Scheduler{}, Toolbox::with_defaults());
  const auto counters = p.mutable_toolbox().instrument();
  RoutingDecision r;
  r.domain = ForgeryDomain::IMDL;
  const auto out = run_ensemble(EnsembleMode::ALWAYS_LLM, solid(8, 8, 5, 5, 5), p, r);
  EXPECT_EQ(out.detector_calls, 1u);
  EXPECT_EQ(out.result.detector_id, "fakeshield");
  EXPECT_EQ(counters.at("fakeshield")->calls(AdapterTask::Detect), 1u);
  EXPECT_EQ(total_calls(counters), 1u);
}

TEST(Ensemble, CallCountsPerMode) {
  Pipeline p(Router(RoutingPolicy::zeros()), Scheduler{}, Toolbox::with_defaults());
  const auto counters = p.mutable_toolbox().instrument();
  const auto img = solid(8, 8, 5, 5, 5);
  const std::pair<EnsembleMode, std::size_t> expect[] = {{EnsembleMode::ANY_VOTE, 8},
                                                         {EnsembleMode::MAJORITY_VOTE, 8},
                                                         {EnsembleMode::ALWAYS_LLM, 1},
                                                         {EnsembleMode::ALWAYS_NON_LLM, 1},
                                                         {EnsembleMode::FULL, 1}};
  for (const auto& [mode, n] : expect) {
    const auto before = total_calls(counters);
    EXPECT_EQ(run_ensemble(mode, img, p).detector_calls, n) << to_cli_token(mode);
    EXPECT_EQ(total_calls(counters) - before, n) << to_cli_token(mode);
  }
}

TEST(Ensemble, AnyVoteWithOnePerfectMember) {
  const auto tb = stub_toolbox([](const DetectorDescriptor& d) {
    return d.detector_id == "aide" ? StubProfile{1.0, 0.0, 1, MaskStyle::NONE, {}}
                                   : StubProfile{0.0, 0.0, 2, MaskStyle::NONE, {}};
  });
  Pipeline p(Router(RoutingPolicy::zeros()), Scheduler{}, tb);
  for (const auto& s : generate_set(40, 21)) {
    const auto any = run_ensemble(EnsembleMode::ANY_VOTE, s.image, p, std::nullopt, s.hint());
    EXPECT_EQ(any.result.verdict, s.label);
    EXPECT_EQ(any.result.confidence, s.label == Verdict::FAKE ? kStubFakeConfidence : kStubRealConfidence);
    const auto maj = run_ensemble(EnsembleMode::MAJORITY_VOTE, s.image, p, std::nullopt, s.hint());
    EXPECT_EQ(maj.result.verdict, Verdict::REAL);
  }
}

TEST(Ensemble, ModeTokens) {
  for (auto m : {EnsembleMode::ANY_VOTE, EnsembleMode::MAJORITY_VOTE, EnsembleMode::ALWAYS_LLM,
                 EnsembleMode::ALWAYS_NON_LLM, EnsembleMode::FULL}) {
    EXPECT_EQ(parse_ensemble_mode(to_cli_token(m)), m);
  }
  EXPECT_FALSE(parse_ensemble_mode("FULL"));
}

class ConfigFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("unishield-config-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
    ::unsetenv(kConfigEnvVar);
  }
  void TearDown() override {
    ::unsetenv(kConfigEnvVar);
    std::filesystem::remove_all(dir_);
  }
  std::filesystem::path write(const std::string& name, const json& j) {
    const auto path = dir_ / name;
    std::ofstream(path) << j.dump(2);
    return path;
  }
  std::filesystem::path dir_;
};

TEST_F(ConfigFiles, ParsesSectionsAndResolvesPolicyPath) {
  auto pol = biased_to(ForgeryDomain::DFD);
  write("policy.json", policy_to_json(pol));
  const auto cfg = load_config(write("c.json", json{{"router", {{"policy_path", "policy.json"}}},
                                                    {"threshold", 0.6},
                                                    {"mode", "majority"},
                                                    {"default_stub", {{"tpr", 0.7}, {"fpr", 0.2}}},
                                                    {"service", {{"port", 9001}}}}));
  ASSERT_TRUE(cfg.policy);
  EXPECT_EQ(cfg.policy->bias, pol.bias);
  EXPECT_EQ(cfg.threshold, 0.6);
  EXPECT_EQ(cfg.default_mode, "majority");
  EXPECT_EQ(cfg.default_stub.tpr, 0.7);
  EXPECT_EQ(cfg.port, 9001);
  const auto p = build_pipeline(cfg);
  EXPECT_EQ(p.route(solid(8, 8, 1, 1, 1)).domain, ForgeryDomain::DFD);
  EXPECT_EQ(p.toolbox().registry().size(), 8u);
}

TEST_F(ConfigFiles, EnvironmentWins) {
  const auto a = write("a.json", json{{"threshold", 0.3}});
  const auto b = write("b.json", json{{"threshold", 0.7}});
  EXPECT_EQ(resolve_config(a).threshold, 0.3);
  EXPECT_EQ(resolve_config(std::nullopt).threshold, 0.5);
  ::setenv(kConfigEnvVar, b.c_str(), 1);
  EXPECT_EQ(resolve_config(a).threshold, 0.7);
  EXPECT_EQ(resolve_config(std::nullopt).threshold, 0.7);
}

TEST_F(ConfigFiles, Rejections) {
  EXPECT_ERROR_CODE(load_config(dir_ / "missing.json"), ErrorCode::IoError);
  std::ofstream(dir_ / "broken.json") << "{ nope";
  EXPECT_ERROR_CODE(load_config(dir_ / "broken.json"), ErrorCode::ConfigError);
  EXPECT_ERROR_CODE(config_from_json(json{{"threshold", 1.0}}), ErrorCode::ConfigError);
  EXPECT_ERROR_CODE(config_from_json(json{{"router", {{"mode", "external"}}}}), ErrorCode::ConfigError);
  EXPECT_ERROR_CODE(config_from_json(json{{"scheduler", {{"mode", "guess"}}}}), ErrorCode::ConfigError);
  EXPECT_ERROR_CODE(config_from_json(json{{"max_in_flight", 0}}), ErrorCode::ConfigError);
  EXPECT_ERROR_CODE(config_from_json(json::array()), ErrorCode::ConfigError);
  EXPECT_ERROR_CODE(config_from_json(json{{"router", {{"policy_path", (dir_ / "nope.json").string()}}}}),
                    ErrorCode::IoError);
}

TEST_F(ConfigFiles, CustomDetectorTable) {
  json dets = json::array();
  for (const auto& d : default_descriptors()) {
    if (d.domain == ForgeryDomain::AIGCD) continue;
    auto j = descriptor_to_json(d);
    if (d.detector_id == "clip") j["stub"] = {{"tpr", 0.0}, {"fpr", 1.0}};
    dets.push_back(j);
  }
  const auto cfg = config_from_json(json{{"detectors", dets}});
  const auto p = build_pipeline(cfg);
  EXPECT_EQ(p.toolbox().registry().size(), 6u);
  EXPECT_FALSE(p.toolbox().registry().contains(ForgeryDomain::AIGCD, ToolClass::LLM_BASED));
  RoutingDecision r;
  r.domain = ForgeryDomain::DFD;
  GroundTruthHint h{Verdict::REAL, std::nullopt, std::nullopt};
  const auto out = run_ensemble(EnsembleMode::ALWAYS_NON_LLM, solid(4, 4, 1, 1, 1, "x"), p, r, h);
  EXPECT_EQ(out.result.detector_id, "clip");
  EXPECT_EQ(out.result.verdict, Verdict::FAKE);
}
