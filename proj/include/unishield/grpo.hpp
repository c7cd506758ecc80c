#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "unishield/router.hpp"

namespace unishield {

struct TrainerConfig {
  double beta = 0.04;             // KL coefficient
  int group_size = 8;             // G
  double learning_rate = 1e-6;
  int steps = 500;
  std::uint64_t seed = 0;
  double reward_format_weight = 1.0;
  int batch_queries = 32;         // queries drawn per step

  /// Throws Error{InvalidArgument}.
  void validate() const;
};

struct RewardBreakdown {
  double task = 0.0;
  double format = 0.0;
  double acc = 0.0;
  double total = 0.0;
};

/// Router reward: format = 1 when an answer tag parses to a track label,
/// task = 1 when that label equals `gt`; total = task + weight * format.
RewardBreakdown reward_task(std::string_view output_text, ForgeryDomain gt,
                            double format_weight = 1.0);

/// Detector reward: format = 1 for <answer>REAL|FAKE</answer>, acc = 1 when
/// the parsed verdict equals `gt`; total = acc + weight * format.
RewardBreakdown reward_detection(std::string_view output_text, Verdict gt,
                                 double format_weight = 1.0);

/// (r - mean) / population std; all zeros when std < 1e-12.
/// Throws Error{GroupTooSmall} for fewer than two rewards.
std::vector<double> group_advantages(std::span<const double> rewards);

/// Sum p_k ln(p_k / q_k) with 0 ln 0 = 0. Throws Error{InvalidArgument} for
/// non-distributions and Error{SupportMismatch} when p_k > 0 = q_k.
double kl_categorical(std::span<const double> p, std::span<const double> p_ref);

struct GroupSample {
  std::vector<double> query_features;
  std::vector<ForgeryDomain> outputs;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

/// mean_i[A_i ln pi(o_i|q)] - beta * mean_q KL(pi(.|q) || pi_ref(.|q)).
double grpo_objective(const RoutingPolicy& policy, const RoutingPolicy& reference,
                      std::span<const GroupSample> batch, const TrainerConfig& config);

struct PolicyGradient {
  std::vector<double> weights;  // same layout as RoutingPolicy::weights
  DomainProbs bias{};
};

/// Analytic gradient of grpo_objective with respect to weights and bias.
PolicyGradient grpo_gradient(const RoutingPolicy& policy, const RoutingPolicy& reference,
                             std::span<const GroupSample> batch, const TrainerConfig& config);

/// Per-feature standardization used as a fixed preconditioner during
/// training. The exported policy has it folded back into raw-feature space.
struct FeatureNormalizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static FeatureNormalizer identity(std::size_t n);
  static FeatureNormalizer fit(std::span<const FeatureVector> features);
  std::vector<double> apply(std::span<const double> raw) const;
  /// Policy over standardized features -> equivalent policy over raw ones.
  RoutingPolicy fold(const RoutingPolicy& standardized) const;
};

struct RoutingExample {
  FeatureVector features;
  ForgeryDomain domain = ForgeryDomain::IMDL;
};

struct TrainerState {
  RoutingPolicy policy;     // over standardized features
  RoutingPolicy reference;  // frozen copy of the starting policy
  TrainerConfig config;
  FeatureNormalizer normalizer;
  std::mt19937_64 rng;
  int step = 0;
};

struct StepLog {
  int step = 0;
  double mean_reward = 0.0;
  double mean_task_reward = 0.0;  // sampled outputs of this step's batch
  // Expected task reward of the updated policy over the whole training set;
  // filled by train_router only.
  std::optional<double> expected_task_reward;
  double kl = 0.0;
  double objective = 0.0;
};

nlohmann::json step_log_to_json(const StepLog& log);

TrainerState make_trainer_state(const TrainerConfig& config, FeatureNormalizer normalizer,
                                RoutingPolicy initial = RoutingPolicy::zeros());

/// Samples G outputs per query from the current policy, renders them as
/// answer-tag text, scores them with reward_task, normalizes advantages per
/// group and takes one gradient-ascent step on grpo_objective.
TrainerState grpo_step(TrainerState state, std::span<const RoutingExample> batch,
                       StepLog* log = nullptr);

/// Policy in raw-feature space for the current state.
RoutingPolicy exported_policy(const TrainerState& state);

struct TrainResult {
  RoutingPolicy policy;
  std::vector<StepLog> logs;
};

/// Full training run: fits the normalizer on `train`, then `config.steps`
/// steps on minibatches of `config.batch_queries` queries drawn with
/// replacement from the seeded generator.
TrainResult train_router(std::span<const RoutingExample> train, const TrainerConfig& config,
                         const std::function<void(const StepLog&)>& on_step = {});

double uniform01(std::mt19937_64& rng);

}  // namespace unishield
