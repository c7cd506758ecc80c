#include "unishield/grpo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "unishield/error.hpp"

namespace unishield {

using nlohmann::json;

void TrainerConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorCode::InvalidArgument, "beta must be >= 0");
  if (group_size < 2) throw Error(ErrorCode::InvalidArgument, "group_size must be >= 2");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "steps must be positive");
  if (batch_queries < 1) throw Error(ErrorCode::InvalidArgument, "batch_queries must be positive");
}

RewardBreakdown reward_task(std::string_view output_text, ForgeryDomain gt, double format_weight) {
  RewardBreakdown r;
  try {
    const auto parsed = parse_answer_tags(output_text);
    r.format = 1.0;
    r.task = parsed == gt ? 1.0 : 0.0;
  } catch (const Error&) {
  }
  r.total = r.task + format_weight * r.format;
  return r;
}

RewardBreakdown reward_detection(std::string_view output_text, Verdict gt, double format_weight) {
  RewardBreakdown r;
  try {
    auto content = extract_answer(output_text);
    for (auto& c : content) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (auto v = parse_verdict(content)) {
      r.format = 1.0;
      r.acc = *v == gt ? 1.0 : 0.0;
    }
  } catch (const Error&) {
  }
  r.total = r.acc + format_weight * r.format;
  return r;
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw Error(ErrorCode::GroupTooSmall, "GRPO groups need at least two samples");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> adv(rewards.size(), 0.0);
  if (sd < 1e-12) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

namespace {

void check_distribution(std::span<const double> p, const char* name) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::InvalidArgument, std::string(name) + " has a negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, std::string(name) + " does not sum to 1");
}

}  // namespace

double kl_categorical(std::span<const double> p, std::span<const double> p_ref) {
  if (p.size() != p_ref.size()) throw Error(ErrorCode::DimensionMismatch, "KL inputs differ in length");
  check_distribution(p, "p");
  check_distribution(p_ref, "p_ref");
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (p_ref[k] == 0.0) throw Error(ErrorCode::SupportMismatch, "p_ref is zero where p is positive");
    kl += p[k] * std::log(p[k] / p_ref[k]);
  }
  return kl;
}

namespace {

std::size_t total_samples(std::span<const GroupSample> batch) {
  std::size_t n = 0;
  for (const auto& g : batch) {
    if (g.outputs.size() != g.advantages.size()) {
      throw Error(ErrorCode::DimensionMismatch, "group outputs and advantages differ in length");
    }
    n += g.outputs.size();
  }
  return n;
}

}  // namespace

double grpo_objective(const RoutingPolicy& policy, const RoutingPolicy& reference,
                      std::span<const GroupSample> batch, const TrainerConfig& config) {
  if (batch.empty()) throw Error(ErrorCode::EmptyInput, "empty GRPO batch");
  const auto n_samples = total_samples(batch);
  double surrogate = 0.0;
  double kl = 0.0;
  for (const auto& g : batch) {
    const auto p = policy_probabilities(policy, g.query_features);
    const auto r = policy_probabilities(reference, g.query_features);
    for (std::size_t i = 0; i < g.outputs.size(); ++i) {
      surrogate += g.advantages[i] * std::log(p[index_of(g.outputs[i])]);
    }
    kl += kl_categorical(p, r);
  }
  const double mean_surrogate = n_samples ? surrogate / static_cast<double>(n_samples) : 0.0;
  return mean_surrogate - config.beta * kl / static_cast<double>(batch.size());
}

PolicyGradient grpo_gradient(const RoutingPolicy& policy, const RoutingPolicy& reference,
                             std::span<const GroupSample> batch, const TrainerConfig& config) {
  if (batch.empty()) throw Error(ErrorCode::EmptyInput, "empty GRPO batch");
  const auto n_samples = static_cast<double>(total_samples(batch));
  const auto n_queries = static_cast<double>(batch.size());
  PolicyGradient grad;
  grad.weights.assign(policy.weights.size(), 0.0);
  for (const auto& g : batch) {
    const auto p = policy_probabilities(policy, g.query_features);
    const auto r = policy_probabilities(reference, g.query_features);
    const double kl = kl_categorical(p, r);
    // d objective / d (scaled logit)
    DomainProbs dl{};
    if (n_samples > 0) {
      for (std::size_t i = 0; i < g.outputs.size(); ++i) {
        const auto o = index_of(g.outputs[i]);
        for (std::size_t k = 0; k < kNumDomains; ++k) {
          dl[k] += g.advantages[i] * ((k == o ? 1.0 : 0.0) - p[k]) / n_samples;
        }
      }
    }
    for (std::size_t k = 0; k < kNumDomains; ++k) {
      dl[k] -= config.beta / n_queries * p[k] * (std::log(p[k]) - std::log(r[k]) - kl);
      dl[k] /= policy.temperature;
      grad.bias[k] += dl[k];
      for (std::size_t f = 0; f < policy.num_features; ++f) {
        grad.weights[f * kNumDomains + k] += dl[k] * g.query_features[f];
      }
    }
  }
  return grad;
}

FeatureNormalizer FeatureNormalizer::identity(std::size_t n) {
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
}

FeatureNormalizer FeatureNormalizer::fit(std::span<const FeatureVector> features) {
  if (features.empty()) throw Error(ErrorCode::EmptyInput, "cannot fit a normalizer on no data");
  const auto n = features.front().size();
  FeatureNormalizer out = identity(n);
  for (const auto& f : features) {
    if (f.size() != n) throw Error(ErrorCode::DimensionMismatch, "feature vectors differ in length");
    for (std::size_t i = 0; i < n; ++i) out.mean[i] += f[i];
  }
  const double count = static_cast<double>(features.size());
  for (auto& m : out.mean) m /= count;
  std::vector<double> var(n, 0.0);
  for (const auto& f : features) {
    for (std::size_t i = 0; i < n; ++i) var[i] += (f[i] - out.mean[i]) * (f[i] - out.mean[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double sd = std::sqrt(var[i] / count);
    out.scale[i] = sd > 1e-12 ? sd : 1.0;
  }
  return out;
}

std::vector<double> FeatureNormalizer::apply(std::span<const double> raw) const {
  if (raw.size() != mean.size()) throw Error(ErrorCode::DimensionMismatch, "normalizer length mismatch");
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mean[i]) / scale[i];
  return out;
}

RoutingPolicy FeatureNormalizer::fold(const RoutingPolicy& standardized) const {
  RoutingPolicy raw = standardized;
  for (std::size_t k = 0; k < kNumDomains; ++k) {
    for (std::size_t f = 0; f < standardized.num_features; ++f) {
      const double w = standardized.weight(f, k) / scale[f];
      raw.weight(f, k) = w;
      raw.bias[k] -= w * mean[f];
    }
  }
  return raw;
}

json step_log_to_json(const StepLog& log) {
  return json{{"step", log.step},
              {"mean_reward", log.mean_reward},
              {"kl", log.kl},
              {"objective", log.objective}};
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

TrainerState make_trainer_state(const TrainerConfig& config, FeatureNormalizer normalizer,
                                RoutingPolicy initial) {
  config.validate();
  initial.validate();
  if (normalizer.mean.size() != initial.num_features) {
    throw Error(ErrorCode::DimensionMismatch, "normalizer and policy disagree on F");
  }
  TrainerState s{initial, initial, config, std::move(normalizer), std::mt19937_64(config.seed), 0};
  return s;
}

namespace {

ForgeryDomain sample_domain(const DomainProbs& p, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < kNumDomains; ++k) {
    acc += p[k];
    if (u < acc) return kAllDomains[k];
  }
  return kAllDomains[kNumDomains - 1];
}

}  // namespace

TrainerState grpo_step(TrainerState state, std::span<const RoutingExample> batch, StepLog* log) {
  if (batch.empty()) throw Error(ErrorCode::EmptyInput, "empty query batch");
  const auto& cfg = state.config;
  std::vector<GroupSample> groups;
  groups.reserve(batch.size());
  double reward_sum = 0.0;
  double task_sum = 0.0;
  for (const auto& ex : batch) {
    GroupSample g;
    g.query_features = state.normalizer.apply(ex.features.values);
    const auto p = policy_probabilities(state.policy, g.query_features);
    for (int i = 0; i < cfg.group_size; ++i) {
      const auto o = sample_domain(p, state.rng);
      const std::string text = "<answer>" + std::string(to_string(o)) + "</answer>";
      const auto r = reward_task(text, ex.domain, cfg.reward_format_weight);
      g.outputs.push_back(o);
      g.rewards.push_back(r.total);
      reward_sum += r.total;
      task_sum += r.task;
    }
    g.advantages = group_advantages(g.rewards);
    groups.push_back(std::move(g));
  }

  const auto grad = grpo_gradient(state.policy, state.reference, groups, cfg);
  if (log) {
    const double n = static_cast<double>(batch.size()) * cfg.group_size;
    double kl = 0.0;
    for (const auto& g : groups) {
      kl += kl_categorical(policy_probabilities(state.policy, g.query_features),
                           policy_probabilities(state.reference, g.query_features));
    }
    log->step = state.step;
    log->mean_reward = reward_sum / n;
    log->mean_task_reward = task_sum / n;
    log->kl = kl / static_cast<double>(groups.size());
    log->objective = grpo_objective(state.policy, state.reference, groups, cfg);
  }
  for (std::size_t i = 0; i < grad.weights.size(); ++i) {
    state.policy.weights[i] += cfg.learning_rate * grad.weights[i];
  }
  for (std::size_t k = 0; k < kNumDomains; ++k) state.policy.bias[k] += cfg.learning_rate * grad.bias[k];
  ++state.step;
  return state;
}

RoutingPolicy exported_policy(const TrainerState& state) { return state.normalizer.fold(state.policy); }

TrainResult train_router(std::span<const RoutingExample> train, const TrainerConfig& config,
                         const std::function<void(const StepLog&)>& on_step) {
  if (train.empty()) throw Error(ErrorCode::EmptyInput, "no training examples");
  std::vector<FeatureVector> feats;
  feats.reserve(train.size());
  for (const auto& ex : train) feats.push_back(ex.features);
  auto state = make_trainer_state(config, FeatureNormalizer::fit(feats),
                                  RoutingPolicy::zeros(train.front().features.size()));
  TrainResult result;
  std::vector<RoutingExample> batch(static_cast<std::size_t>(config.batch_queries));
  for (int s = 0; s < config.steps; ++s) {
    for (auto& slot : batch) {
      slot = train[static_cast<std::size_t>(uniform01(state.rng) * static_cast<double>(train.size()))];
    }
    StepLog log;
    state = grpo_step(std::move(state), batch, &log);
    const auto policy = exported_policy(state);
    double expected = 0.0;
    for (const auto& ex : train) expected += policy_probabilities(policy, ex.features.values)[index_of(ex.domain)];
    log.expected_task_reward = expected / static_cast<double>(train.size());
    if (on_step) on_step(log);
    result.logs.push_back(log);
  }
  result.policy = exported_policy(state);
  return result;
}

}  // namespace unishield
