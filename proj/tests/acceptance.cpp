// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "json.hpp"
#include "unishield/ensemble.hpp"
#include "unishield/error.hpp"
#include "unishield/evaluate.hpp"
#include "unishield/features.hpp"
#include "unishield/grpo.hpp"
#include "unishield/metrics.hpp"
#include "unishield/pipeline.hpp"
#include "unishield/protocol.hpp"
#include "unishield/report.hpp"
#include "unishield/rle.hpp"
#include "unishield/synthetic.hpp"

using namespace unishield;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Mask random_mask(std::mt19937_64& rng, int max_side) {
  std::uniform_int_distribution<int> side(1, max_side);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int w = side(rng), h = side(rng);
  // Mix dense, sparse, empty and full masks.
  const int kind = static_cast<int>(rng() % 8);
  const double p = kind == 0 ? 0.0 : kind == 1 ? 1.0 : u(rng);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  for (auto& b : bits) b = u(rng) < p ? 1 : 0;
  return Mask(w, h, std::move(bits));
}

ImageRecord tiny_image(const std::string& id, std::uint8_t shade = 128) {
  return ImageRecord::from_pixels(id, 2, 2, std::vector<std::uint8_t>(12, shade));
}

// Manifest served from memory: image_path is the sample id.
struct InMemory {
  std::vector<ManifestEntry> manifest;
  std::map<std::string, SyntheticSample> by_id;

  explicit InMemory(const std::vector<SyntheticSample>& samples) {
    for (const auto& s : samples) {
      ManifestEntry e;
      e.image_path = s.image.id();
      e.gt_verdict = s.label;
      e.gt_domain = s.domain;
      if (s.mask) e.gt_mask_path = s.image.id();
      if (s.cue != SyntheticCue::NONE) e.cue = std::string(to_string(s.cue));
      manifest.push_back(e);
      by_id.emplace(s.image.id(), s);
    }
  }
  ImageLoader images() const {
    return [this](const ManifestEntry& e) { return by_id.at(e.image_path).image; };
  }
  MaskLoader masks() const {
    return [this](const ManifestEntry& e) -> std::optional<Mask> {
      if (!e.gt_mask_path) return std::nullopt;
      return by_id.at(e.image_path).mask;
    };
  }
};

// ---------------------------------------------------------------------------

Outcome metric_oracles() {
  Outcome o;
  std::mt19937_64 rng(101);
  auto same = [&](const MetricValue& got, std::optional<double> want, const char* what) {
    if (got.has_value() != want.has_value() || (got && std::abs(*got - *want) > 1e-9)) {
      o.fail(std::string(what) + " differs from the count oracle");
    }
  };
  for (int i = 0; i < 200; ++i) {
    const auto gt = random_mask(rng, 16);
    std::vector<std::uint8_t> bits(gt.size());
    const int kind = static_cast<int>(rng() % 5);
    for (std::size_t k = 0; k < bits.size(); ++k) {
      bits[k] = kind == 0 ? gt.bits()[k] : kind == 1 ? 0 : static_cast<std::uint8_t>(rng() % 2);
    }
    const Mask pred(gt.width(), gt.height(), bits);
    double tp = 0, fp = 0, fn = 0;
    for (int y = 0; y < gt.height(); ++y)
      for (int x = 0; x < gt.width(); ++x) {
        tp += pred.at(x, y) && gt.at(x, y);
        fp += pred.at(x, y) && !gt.at(x, y);
        fn += !pred.at(x, y) && gt.at(x, y);
      }
    auto div = [](double a, double b) { return b == 0 ? std::optional<double>() : std::optional<double>(a / b); };
    const auto m = pixel_metrics(pred, gt);
    if (tp + fp + fn == 0) {
      for (const auto& v : {m.precision, m.recall, m.f1, m.iou}) same(v, 1.0, "empty-pair metric");
    } else {
      same(m.precision, div(tp, tp + fp), "precision");
      same(m.recall, div(tp, tp + fn), "recall");
      same(m.f1, div(2 * tp, 2 * tp + fp + fn), "f1");
      same(m.iou, div(tp, tp + fp + fn), "iou");
    }
  }
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng() % 32;
    std::vector<VerdictPair> pairs(n);
    std::vector<ScoredLabel> scored(n);
    const int levels = 1 + static_cast<int>(rng() % 6);  // coarse scores force ties
    for (std::size_t k = 0; k < n; ++k) {
      const auto truth = rng() % 2 ? Verdict::FAKE : Verdict::REAL;
      pairs[k] = {rng() % 2 ? Verdict::FAKE : Verdict::REAL, truth};
      scored[k] = {static_cast<double>(rng() % static_cast<std::uint64_t>(levels + 1)) / levels, truth};
    }
    double correct = 0, tp = 0, fp = 0, fn = 0;
    for (const auto& p : pairs) {
      correct += p.predicted == p.truth;
      tp += p.predicted == Verdict::FAKE && p.truth == Verdict::FAKE;
      fp += p.predicted == Verdict::FAKE && p.truth == Verdict::REAL;
      fn += p.predicted == Verdict::REAL && p.truth == Verdict::FAKE;
    }
    const auto im = image_metrics(pairs);
    if (std::abs(im.acc - correct / static_cast<double>(n)) > 1e-9) o.fail("acc differs from the count oracle");
    same(im.img_f1, 2 * tp + fp + fn == 0 ? std::optional<double>() : (2 * tp) / (2 * tp + fp + fn), "img_f1");

    double wins = 0, total = 0;
    for (const auto& a : scored)
      for (const auto& b : scored)
        if (a.truth == Verdict::FAKE && b.truth == Verdict::REAL) {
          total += 1;
          wins += a.confidence > b.confidence ? 1.0 : a.confidence == b.confidence ? 0.5 : 0.0;
        }
    try {
      const double a = auc(scored);
      if (total == 0) o.fail("auc accepted a one-class set");
      else if (std::abs(a - wins / total) > 1e-9) o.fail("auc differs from pairwise enumeration");
    } catch (const Error& e) {
      if (total != 0 || e.code() != ErrorCode::DegenerateClasses) o.fail(std::string("auc threw ") + e.what());
    }
  }
  o.detail = o.pass ? "200 mask pairs, 200 score sets, tol 1e-9" : o.detail;
  return o;
}

Outcome codec_round_trip() {
  Outcome o;
  std::mt19937_64 rng(202);
  int failures = 0;
  for (int i = 0; i < 500; ++i) {
    const auto m = random_mask(rng, 64);
    const auto text = encode_mask_rle(m);
    const auto back = decode_mask_rle(text);
    if (!(back == m) || encode_mask_rle(back) != text) ++failures;
  }
  if (failures) o.fail(std::to_string(failures) + " of 500 masks changed");
  else o.detail = "500 masks up to 64x64, 0 failures";
  return o;
}

struct GrpoInstance {
  RoutingPolicy policy;
  RoutingPolicy reference;
  std::vector<GroupSample> batch;
  TrainerConfig config;
};

GrpoInstance random_grpo_instance(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrpoInstance in;
  const std::size_t f = 1 + rng() % kNumFeatures;
  in.policy = RoutingPolicy::zeros(f);
  in.reference = RoutingPolicy::zeros(f);
  for (auto& w : in.policy.weights) w = 0.7 * n(rng);
  for (auto& w : in.reference.weights) w = 0.7 * n(rng);
  for (auto& b : in.policy.bias) b = n(rng);
  for (auto& b : in.reference.bias) b = n(rng);
  in.policy.temperature = 0.5 + 1.5 * u(rng);
  in.reference.temperature = 0.5 + 1.5 * u(rng);
  in.config.beta = 0.5 * u(rng);
  in.config.group_size = 2 + static_cast<int>(rng() % 7);
  const int queries = 1 + static_cast<int>(rng() % 4);
  for (int q = 0; q < queries; ++q) {
    GroupSample g;
    for (std::size_t k = 0; k < f; ++k) g.query_features.push_back(n(rng));
    for (int i = 0; i < in.config.group_size; ++i) {
      g.outputs.push_back(kAllDomains[rng() % 4]);
      g.rewards.push_back(static_cast<double>(rng() % 3));
    }
    g.advantages = group_advantages(g.rewards);
    in.batch.push_back(std::move(g));
  }
  return in;
}

Outcome grpo_correctness() {
  Outcome o;
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    auto in = random_grpo_instance(rng);
    const auto g = grpo_gradient(in.policy, in.reference, in.batch, in.config);
    std::vector<double> analytic = g.weights;
    analytic.insert(analytic.end(), g.bias.begin(), g.bias.end());
    std::vector<double> numeric;
    auto probe = [&](double& slot) {
      const double orig = slot, h = 1e-5 * std::max(1.0, std::abs(orig));
      slot = orig + h;
      const double up = grpo_objective(in.policy, in.reference, in.batch, in.config);
      slot = orig - h;
      const double down = grpo_objective(in.policy, in.reference, in.batch, in.config);
      slot = orig;
      numeric.push_back((up - down) / (2 * h));
    };
    for (auto& w : in.policy.weights) probe(w);
    for (auto& b : in.policy.bias) probe(b);
    double diff = 0, scale = 0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(scale, 1e-8));
  }
  if (worst >= 1e-4) o.fail("gradient relative error " + fmt("%.3g", worst));

  std::normal_distribution<double> n(0.0, 4.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> r(2 + rng() % 15);
    for (auto& x : r) x = t % 2 ? n(rng) : static_cast<double>(rng() % 3);
    const auto a = group_advantages(r);
    double mean = 0, var = 0;
    for (double x : a) mean += x;
    mean /= static_cast<double>(a.size());
    for (double x : a) var += (x - mean) * (x - mean);
    var /= static_cast<double>(a.size());
    const bool flat = std::all_of(r.begin(), r.end(), [&](double x) { return x == r[0]; });
    if (std::abs(mean) > 1e-9 || (flat ? var != 0.0 : std::abs(var - 1.0) > 1e-6)) {
      o.fail("advantage moments off");
    }
  }

  std::exponential_distribution<double> e(1.0);
  double min_kl = 1.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> p(4), q(4);
    double sp = 0, sq = 0;
    for (int k = 0; k < 4; ++k) {
      p[k] = rng() % 4 == 0 ? 0.0 : e(rng);
      q[k] = e(rng) + 1e-9;
      sp += p[k];
      sq += q[k];
    }
    if (sp == 0) p[0] = sp = 1;
    for (int k = 0; k < 4; ++k) {
      p[k] /= sp;
      q[k] /= sq;
    }
    min_kl = std::min(min_kl, kl_categorical(p, q));
  }
  if (min_kl < 0) o.fail("negative KL " + fmt("%.3g", min_kl));
  if (o.pass) o.detail = "max grad rel err " + fmt("%.2e", worst) + ", 1000 advantage groups, min KL " + fmt("%.2e", min_kl);
  return o;
}

Outcome grpo_convergence() {
  Outcome o;
  auto to_examples = [](const std::vector<SyntheticSample>& set) {
    std::vector<RoutingExample> out;
    for (const auto& s : set) out.push_back({extract_features(s.image), s.domain});
    return out;
  };
  const auto train = to_examples(generate_set(800, 1, CueMix::NONE, 32, "train"));
  const auto test = to_examples(generate_set(200, 2, CueMix::NONE, 32, "test"));
  TrainerConfig cfg;
  cfg.group_size = 8;
  cfg.beta = 0.04;
  cfg.learning_rate = 0.1;
  cfg.steps = 500;
  cfg.seed = 3;
  const auto a = train_router(train, cfg);
  const auto b = train_router(train, cfg);
  bool identical = a.policy.weights == b.policy.weights && a.policy.bias == b.policy.bias &&
                   a.logs.size() == b.logs.size();
  for (std::size_t i = 0; identical && i < a.logs.size(); ++i) {
    identical = a.logs[i].mean_reward == b.logs[i].mean_reward && a.logs[i].kl == b.logs[i].kl &&
                a.logs[i].objective == b.logs[i].objective;
  }
  std::vector<RoutedPair> routed;
  for (const auto& ex : test) routed.push_back({route_policy(ex.features, a.policy).domain, ex.domain});
  const double acc = routing_accuracy(routed);
  if (acc < 0.95) o.fail("held-out routing accuracy " + fmt("%.3f", acc));
  if (!identical) o.fail("seeded runs differ");
  if (o.pass) o.detail = "held-out routing accuracy " + fmt("%.3f", acc) + " after 500 steps, seeded runs bit-identical";
  return o;
}

// P(at least k successes) for independent Bernoulli(p_i).
double at_least(const std::vector<double>& p, std::size_t k) {
  std::vector<double> dist(p.size() + 1, 0.0);
  dist[0] = 1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j > 0; --j) dist[j] = dist[j] * (1 - p[i]) + dist[j - 1] * p[i];
    dist[0] *= 1 - p[i];
  }
  double s = 0;
  for (std::size_t j = k; j < dist.size(); ++j) s += dist[j];
  return s;
}

Outcome ensemble_math() {
  Outcome o;
  const std::map<std::string, DetectionRates> rates = {
      {"iml-vit", {0.60, 0.10}}, {"fakeshield", {0.55, 0.15}}, {"ascformer", {0.70, 0.05}},
      {"dmdl-r1", {0.50, 0.20}}, {"clip", {0.65, 0.10}},       {"dfd-r1", {0.45, 0.12}},
      {"aide", {0.60, 0.08}},    {"fakevlm", {0.50, 0.15}}};
  Toolbox tb;
  std::uint64_t salt = 1000;
  std::vector<double> tpr, fpr;
  for (const auto& d : default_descriptors()) {
    const auto r = rates.at(d.detector_id);
    tb.add(d, StubProfile{r.tpr, r.fpr, salt++, MaskStyle::NONE, {}});
    tpr.push_back(r.tpr);
    fpr.push_back(r.fpr);
  }
  Pipeline p(Router(RoutingPolicy::zeros()), Scheduler{}, std::move(tb));

  std::vector<SyntheticSample> samples;
  for (int i = 0; i < 10000; ++i) {
    SyntheticSample s;
    s.image = tiny_image("ens-" + std::to_string(i));
    s.domain = kAllDomains[static_cast<std::size_t>(i) % 4];
    s.label = i % 2 ? Verdict::FAKE : Verdict::REAL;
    samples.push_back(std::move(s));
  }
  const InMemory data(samples);
  const double any_expected = 0.5 * at_least(tpr, 1) + 0.5 * (1 - at_least(fpr, 1));
  const double maj_expected = 0.5 * at_least(tpr, 4) + 0.5 * (1 - at_least(fpr, 4));
  const auto any = evaluate(data.manifest, EnsembleMode::ANY_VOTE, p, {}, data.images(), data.masks());
  const auto maj = evaluate(data.manifest, EnsembleMode::MAJORITY_VOTE, p, {}, data.images(), data.masks());
  const double any_acc = *any.per_domain.at("ALL").acc;
  const double maj_acc = *maj.per_domain.at("ALL").acc;
  if (std::abs(any_acc - any_expected) > 0.02) o.fail("any-vote " + fmt("%.4f", any_acc) + " vs " + fmt("%.4f", any_expected));
  if (std::abs(maj_acc - maj_expected) > 0.02) o.fail("majority " + fmt("%.4f", maj_acc) + " vs " + fmt("%.4f", maj_expected));
  if (o.pass) {
    o.detail = "any " + fmt("%.4f", any_acc) + " (closed form " + fmt("%.4f", any_expected) + "), majority " +
               fmt("%.4f", maj_acc) + " (closed form " + fmt("%.4f", maj_expected) + ")";
  }
  return o;
}

Outcome ablation_pattern() {
  Outcome o;
  // LLM stubs are strong on semantic fixtures and biased toward FAKE on
  // artifact fixtures; non-LLM stubs mirror that.
  const DetectionRates strong{0.95, 0.05};
  const DetectionRates biased{0.30, 0.70};
  auto build = [&] {
    Toolbox tb;
    std::uint64_t salt = 77;
    for (const auto& d : default_descriptors()) {
      StubProfile s{0.5, 0.5, salt++, MaskStyle::NONE, {}};
      const bool llm = d.tool_class == ToolClass::LLM_BASED;
      s.cue_rates["semantic"] = llm ? strong : biased;
      s.cue_rates["artifact"] = llm ? biased : strong;
      tb.add(d, s);
    }
    return Pipeline(Router(RoutingPolicy::zeros()), Scheduler{}, std::move(tb));
  };
  const auto p = build();
  const InMemory data(generate_set(2000, 11, CueMix::MIXED, 32, "mixed"));
  std::map<EnsembleMode, double> acc;
  for (auto mode : {EnsembleMode::FULL, EnsembleMode::ALWAYS_LLM, EnsembleMode::ALWAYS_NON_LLM,
                    EnsembleMode::MAJORITY_VOTE, EnsembleMode::ANY_VOTE}) {
    acc[mode] = *evaluate(data.manifest, mode, p, {}, data.images(), data.masks()).per_domain.at("ALL").acc;
  }
  const auto again = evaluate(data.manifest, EnsembleMode::FULL, build(), {}, data.images(), data.masks());
  for (auto mode : {EnsembleMode::ALWAYS_LLM, EnsembleMode::ALWAYS_NON_LLM, EnsembleMode::MAJORITY_VOTE,
                    EnsembleMode::ANY_VOTE}) {
    if (!(acc[EnsembleMode::FULL] > acc[mode])) o.fail(std::string("full does not beat ") + std::string(to_cli_token(mode)));
  }
  if (!(acc[EnsembleMode::MAJORITY_VOTE] > acc[EnsembleMode::ANY_VOTE])) o.fail("majority does not beat any");
  if (*again.per_domain.at("ALL").acc != acc[EnsembleMode::FULL]) o.fail("rerun differs");
  std::ostringstream d;
  for (auto mode : {EnsembleMode::FULL, EnsembleMode::MAJORITY_VOTE, EnsembleMode::ALWAYS_LLM,
                    EnsembleMode::ALWAYS_NON_LLM, EnsembleMode::ANY_VOTE}) {
    d << to_cli_token(mode) << " " << fmt("%.4f", acc[mode]) << (mode == EnsembleMode::ANY_VOTE ? "" : ", ");
  }
  if (o.pass) o.detail = d.str();
  else o.detail += " [" + d.str() + "]";
  return o;
}

Outcome exactly_one_dispatch() {
  Outcome o;
  Pipeline p(Router(RoutingPolicy::zeros()), Scheduler{}, Toolbox::with_defaults());
  const auto counters = p.mutable_toolbox().instrument();
  const InMemory data(generate_set(1000, 21, CueMix::MIXED, 32, "dispatch"));
  EvalOptions opt;
  opt.max_in_flight = 4;
  const auto rep = evaluate(data.manifest, EnsembleMode::FULL, p, opt, data.images(), data.masks());
  std::size_t detect = 0, other = 0;
  for (const auto& [id, c] : counters) {
    detect += c->calls(AdapterTask::Detect);
    other += c->total() - c->calls(AdapterTask::Detect);
  }
  if (detect != 1000 || other != 0) o.fail(std::to_string(detect) + " detect calls for 1000 images");
  if (rep.detector_calls != 1000) o.fail("reported " + std::to_string(rep.detector_calls) + " calls");
  if (rep.per_domain.at("ALL").n_errors != 0) o.fail("evaluation recorded errors");
  if (o.pass) o.detail = "1000 images, 1000 detect calls";
  return o;
}

Outcome report_invariants() {
  Outcome o;
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 3.0);
  const MaskStyle styles[] = {MaskStyle::NONE, MaskStyle::GT_ECHO, MaskStyle::CENTER_BLOCK};
  auto echo = std::make_shared<FunctionTransport>([](const AdapterRequest& req) {
    auto j = make_ok_reply(req.request_id);
    j["text"] = req.hints.at("template_report").dump();
    return j.dump();
  });
  for (int i = 0; i < 1000; ++i) {
    auto policy = RoutingPolicy::zeros();
    for (auto& w : policy.weights) w = n(rng);
    for (auto& b : policy.bias) b = n(rng);
    Toolbox tb;
    std::uint64_t salt = rng();
    const auto style = styles[rng() % 3];
    for (const auto& d : default_descriptors()) tb.add(d, StubProfile{u(rng), u(rng), salt++, style, {}});
    HeuristicConfig heur;
    heur.noise_cap = 50 + 800 * u(rng);
    Pipeline plain(Router(policy), Scheduler(heur), tb);
    Summarizer summarizer;
    summarizer.set_adapter(echo, std::chrono::milliseconds(1000), false);
    Pipeline echoed(Router(policy), Scheduler(heur), tb, summarizer);

    const auto domain = kAllDomains[rng() % 4];
    const auto label = rng() % 2 ? Verdict::FAKE : Verdict::REAL;
    const auto cue = static_cast<SyntheticCue>(rng() % 3);
    const int size = 16 + static_cast<int>(rng() % 33);
    const auto sample = generate_sample(domain, label, cue, rng(), size, "inv-" + std::to_string(i));
    auto hint = sample.hint();
    if (!hint.mask && label == Verdict::FAKE && style == MaskStyle::GT_ECHO) {
      // Echo stubs need a mask source on every fake, whatever its track.
      std::vector<std::uint8_t> bits(static_cast<std::size_t>(size) * size);
      for (auto& b : bits) b = u(rng) < 0.3;
      hint.mask = Mask(size, size, std::move(bits));
    }

    try {
      const auto run = plain.run(sample.image, hint);
      const auto& r = run.report;
      const auto problem = validate_report_json(report_to_json(r));
      if (!problem.empty()) o.fail("invalid report: " + problem);
      const bool want_loc = requires_localization(r.detection.domain) && r.detection.verdict == Verdict::FAKE;
      if (r.localization.has_value() != want_loc) o.fail("localization presence broken");
      if (r.detection.verdict != run.detection.verdict || r.detection.confidence != run.detection.confidence ||
          r.detection.domain != run.routing.domain || r.detection.tool_class != run.schedule.tool_class ||
          r.detection.detector_id != run.detection.detector_id) {
        o.fail("report facts differ from the run");
      }
      const auto ext = echoed.run(sample.image, hint).report;
      if (!(ext.detection == r.detection) || !(ext.localization == r.localization)) {
        o.fail("external summarizer changed machine fields");
      }
      if (!validate_report_json(report_to_json(ext)).empty()) o.fail("invalid external report");
    } catch (const std::exception& e) {
      o.fail(std::string("run threw: ") + e.what());
    }
  }
  if (o.pass) o.detail = "1000 randomized runs, echo summarizer preserves machine fields";
  return o;
}

// Adapter that replays a scripted reply or failure.
class ScriptedTransport final : public Transport {
 public:
  std::function<std::string(const AdapterRequest&, std::chrono::milliseconds)> next;
  std::string call(const AdapterRequest& r, std::chrono::milliseconds t) override { return next(r, t); }
};

Outcome protocol_robustness() {
  Outcome o;
  auto scripted = std::make_shared<ScriptedTransport>();
  Toolbox tb;
  for (auto d : default_descriptors()) {
    d.timeout_ms = 5;
    tb.add(d, scripted);
  }
  Pipeline p(Router(RoutingPolicy::zeros()), Scheduler{}, std::move(tb));
  const auto image = generate_sample(ForgeryDomain::IMDL, Verdict::FAKE, SyntheticCue::NONE, 9, 24, "fuzz").image;
  const std::string good_rle = encode_mask_rle(Mask(24, 24, std::vector<std::uint8_t>(576, 1)));

  std::mt19937_64 rng(505);
  auto random_text = [&](std::size_t len) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += static_cast<char>(rng() % 256);
    return s;
  };
  auto random_scalar = [&]() -> json {
    switch (rng() % 6) {
      case 0: return nullptr;
      case 1: return static_cast<int>(rng() % 1000) - 500;
      case 2: return json::array({1, "x"});
      case 3: return json::object({{"k", 1}});
      case 4: return rng() % 2 == 0;
      default: return random_text(1 + rng() % 6);
    }
  };
  auto valid = [&](const AdapterRequest& r) {
    auto j = make_ok_reply(r.request_id);
    j["verdict"] = "FAKE";
    j["confidence"] = 0.8;
    j["mask_rle"] = good_rle;
    return j;
  };

  std::map<ErrorCode, int> seen;
  constexpr int kKinds = 16;
  for (int i = 0; i < 1000; ++i) {
    const int kind = i % kKinds;
    scripted->next = [&, kind](const AdapterRequest& r, std::chrono::milliseconds timeout) -> std::string {
      auto j = valid(r);
      switch (kind) {
        case 0: {  // truncated
          const auto s = j.dump();
          return s.substr(0, rng() % (s.size() - 1));
        }
        case 1: {  // raw bytes
          auto s = random_text(rng() % 64);
          return json::accept(s) ? "}" + s : s;
        }
        case 2: return json(json::array({random_scalar()})).dump();
        case 3: j.erase("request_id"); return j.dump();
        case 4: j["request_id"] = rng() % 2 ? json(r.request_id + "x") : random_scalar(); return j.dump();
        case 5: j.erase("status"); return j.dump();
        case 6: j["status"] = rng() % 2 ? json("OK") : random_scalar(); return j.dump();
        case 7: j["status"] = "error"; j["error"] = "model crashed"; return j.dump();
        case 8:
          if (rng() % 2) j.erase("verdict");
          else j["verdict"] = rng() % 2 ? json("fake") : random_scalar();
          return j.dump();
        case 9: {
          const double bad[] = {-0.1, 1.0000001, 7.0, -1e9};
          if (rng() % 3 == 0) j.erase("confidence");
          else if (rng() % 2) j["confidence"] = bad[rng() % 4];
          else j["confidence"] = std::to_string(rng() % 100);
          return j.dump();
        }
        case 10: {
          const std::string broken[] = {"24,24", "24x24:576", "24,24:575", "24,24:300,300", "-1,24:576",
                                        "24,24:1,,575", "", "24,24:a"};
          j["mask_rle"] = broken[rng() % 8];
          return j.dump();
        }
        case 11:
          j["mask_rle"] = encode_mask_rle(Mask(1 + static_cast<int>(rng() % 23), 24));
          return j.dump();
        case 12: j["mask_rle"] = nullptr; return j.dump();
        case 13: return j.dump() + " trailing";
        case 14:
          if (rng() % 2) throw Error(ErrorCode::AdapterError, "adapter process exited before replying");
          std::this_thread::sleep_for(timeout);
          throw Error(ErrorCode::Timeout, "adapter did not reply in time");
        default: j["mask_rle"] = random_scalar(); if (j["mask_rle"].is_null()) j["mask_rle"] = 3; return j.dump();
      }
    };
    try {
      const auto run = p.run(image, GroundTruthHint{Verdict::FAKE, std::nullopt, std::nullopt});
      o.fail("malformed reply kind " + std::to_string(kind) + " accepted");
    } catch (const Error& e) {
      const auto c = e.code();
      if (c != ErrorCode::ProtocolViolation && c != ErrorCode::Timeout && c != ErrorCode::AdapterError) {
        o.fail("kind " + std::to_string(kind) + " raised " + std::string(to_string(c)));
      }
      if (e.stage() != Stage::kToolbox) o.fail("kind " + std::to_string(kind) + " without toolbox stage");
      ++seen[c];
    } catch (const std::exception& e) {
      o.fail("kind " + std::to_string(kind) + " escaped as " + e.what());
    }
  }
  if (o.pass) {
    o.detail = "1000 replies: ProtocolViolation " + std::to_string(seen[ErrorCode::ProtocolViolation]) +
               ", AdapterError " + std::to_string(seen[ErrorCode::AdapterError]) + ", Timeout " +
               std::to_string(seen[ErrorCode::Timeout]) + ", all at stage toolbox";
  }
  return o;
}

struct Criterion {
  const char* name;
  double limit_s;  // 0 = no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"metric-oracles", 5.0, metric_oracles},
      {"codec-round-trip", 0.0, codec_round_trip},
      {"grpo-correctness", 30.0, grpo_correctness},
      {"grpo-convergence", 60.0, grpo_convergence},
      {"ensemble-math", 60.0, ensemble_math},
      {"ablation-pattern", 0.0, ablation_pattern},
      {"exactly-one-dispatch", 0.0, exactly_one_dispatch},
      {"report-invariants", 0.0, report_invariants},
      {"protocol-robustness", 0.0, protocol_robustness},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(std::string("uncaught: ") + e.what());
    }
    const double s = seconds_since(t);
    if (c.limit_s > 0 && s >= c.limit_s) o.fail("took " + fmt("%.1f", s) + " s, limit " + fmt("%.0f", c.limit_s) + " s");
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " (" << fmt("%.2f", s) << " s)"
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
