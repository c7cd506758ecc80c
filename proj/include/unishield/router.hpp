#pragma once

#include <array>
#include <chrono>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "unishield/features.hpp"
#include "unishield/transport.hpp"
#include "unishield/types.hpp"

namespace unishield {

using DomainProbs = std::array<double, kNumDomains>;

/// Linear-softmax routing policy: probs = softmax((W^T x + b) / temperature).
/// `weights` is row-major F x 4 (row = feature, column = domain).
struct RoutingPolicy {
  std::size_t num_features = kNumFeatures;
  std::vector<double> weights = std::vector<double>(kNumFeatures * kNumDomains, 0.0);
  DomainProbs bias{};
  double temperature = 1.0;

  double& weight(std::size_t feature, std::size_t domain) { return weights[feature * kNumDomains + domain]; }
  double weight(std::size_t feature, std::size_t domain) const {
    return weights[feature * kNumDomains + domain];
  }

  /// Throws Error{InvalidArgument} on non-finite entries, bad shape or
  /// temperature <= 0.
  void validate() const;

  static RoutingPolicy zeros(std::size_t num_features = kNumFeatures);
};

nlohmann::json policy_to_json(const RoutingPolicy& policy);
RoutingPolicy policy_from_json(const nlohmann::json& j);

enum class RoutingSource { POLICY, EXTERNAL_ADAPTER };
std::string_view to_string(RoutingSource s);

struct RoutingDecision {
  ForgeryDomain domain = ForgeryDomain::IMDL;
  DomainProbs probabilities{};
  RoutingSource source = RoutingSource::POLICY;
  std::optional<std::string> raw_text;
};

/// Numerically stable softmax.
DomainProbs softmax(const DomainProbs& logits);

/// First index of the maximum; ties resolve to the earlier domain.
ForgeryDomain argmax_domain(const DomainProbs& probs);

/// Raw logits (before temperature). Throws Error{DimensionMismatch}.
DomainProbs policy_logits(const RoutingPolicy& policy, std::span<const double> features);
DomainProbs policy_probabilities(const RoutingPolicy& policy, std::span<const double> features);

RoutingDecision route_policy(const FeatureVector& features, const RoutingPolicy& policy);

/// Content of the first well-formed <answer>...</answer> pair, trimmed.
/// Throws Error{MissingAnswerTag}.
std::string extract_answer(std::string_view text);

/// Trimmed, case-folded answer mapped onto the four track tokens.
/// Throws Error{MissingAnswerTag} or Error{UnknownLabel}.
ForgeryDomain parse_answer_tags(std::string_view text);

inline constexpr std::string_view kRouterPromptVersion = "router-prompt/1";
extern const std::string_view kRouterPrompt;

/// Track assignment in either local-policy or external-adapter mode.
class Router {
 public:
  explicit Router(RoutingPolicy policy) : policy_(std::move(policy)) { policy_.validate(); }

  void set_adapter(std::shared_ptr<Transport> adapter, std::chrono::milliseconds timeout) {
    adapter_ = std::move(adapter);
    timeout_ = timeout;
  }
  bool has_adapter() const { return adapter_ != nullptr; }
  const RoutingPolicy& policy() const { return policy_; }

  RoutingDecision route(const ImageRecord& image, RoutingSource mode) const;
  RoutingDecision route(const ImageRecord& image, const FeatureVector& features,
                        RoutingSource mode) const;

 private:
  RoutingDecision route_external(const ImageRecord& image) const;

  RoutingPolicy policy_;
  std::shared_ptr<Transport> adapter_;
  std::chrono::milliseconds timeout_{30000};
};

}  // namespace unishield
