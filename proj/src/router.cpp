#include "unishield/router.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "unishield/error.hpp"

namespace unishield {

using nlohmann::json;

const std::string_view kRouterPrompt =
    "You are a forensic image analyst. Decide which forgery-detection track this image "
    "belongs to. Tracks: IMDL (manipulation of natural photos such as splicing, copy-move, "
    "removal or inpainting), DMDL (tampering of document or text images), DFD (DeepFake "
    "face swapping or reenactment), AIGCD (fully AI-generated images). Think inside "
    "<think></think> and give exactly one label inside <answer></answer>.";

void RoutingPolicy::validate() const {
  if (num_features == 0 || weights.size() != num_features * kNumDomains) {
    throw Error(ErrorCode::InvalidArgument, "policy weights must be F x 4");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(weights.begin(), weights.end(), finite) ||
      !std::all_of(bias.begin(), bias.end(), finite)) {
    throw Error(ErrorCode::InvalidArgument, "policy parameters must be finite");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::InvalidArgument, "policy temperature must be positive");
  }
}

RoutingPolicy RoutingPolicy::zeros(std::size_t num_features) {
  RoutingPolicy p;
  p.num_features = num_features;
  p.weights.assign(num_features * kNumDomains, 0.0);
  return p;
}

json policy_to_json(const RoutingPolicy& policy) {
  return json{{"schema_version", kFeatureSchemaVersion},
              {"F", policy.num_features},
              {"weights", policy.weights},
              {"bias", policy.bias},
              {"temperature", policy.temperature}};
}

RoutingPolicy policy_from_json(const json& j) {
  try {
    RoutingPolicy p;
    if (j.at("schema_version").get<int>() != kFeatureSchemaVersion) {
      throw Error(ErrorCode::InvalidArgument, "unsupported policy schema_version");
    }
    p.num_features = j.at("F").get<std::size_t>();
    p.weights = j.at("weights").get<std::vector<double>>();
    const auto bias = j.at("bias").get<std::vector<double>>();
    if (bias.size() != kNumDomains) throw Error(ErrorCode::InvalidArgument, "bias must have 4 entries");
    std::copy(bias.begin(), bias.end(), p.bias.begin());
    p.temperature = j.at("temperature").get<double>();
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid policy document: ") + e.what());
  }
}

std::string_view to_string(RoutingSource s) {
  return s == RoutingSource::POLICY ? "POLICY" : "EXTERNAL_ADAPTER";
}

DomainProbs softmax(const DomainProbs& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  DomainProbs out{};
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumDomains; ++k) {
    out[k] = std::exp(logits[k] - mx);
    sum += out[k];
  }
  for (auto& v : out) v /= sum;
  return out;
}

ForgeryDomain argmax_domain(const DomainProbs& probs) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumDomains; ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  return kAllDomains[best];
}

DomainProbs policy_logits(const RoutingPolicy& policy, std::span<const double> features) {
  if (features.size() != policy.num_features) {
    throw Error(ErrorCode::DimensionMismatch,
                "feature length " + std::to_string(features.size()) + " != policy F " +
                    std::to_string(policy.num_features));
  }
  DomainProbs z = policy.bias;
  for (std::size_t f = 0; f < policy.num_features; ++f) {
    for (std::size_t k = 0; k < kNumDomains; ++k) z[k] += policy.weight(f, k) * features[f];
  }
  return z;
}

DomainProbs policy_probabilities(const RoutingPolicy& policy, std::span<const double> features) {
  auto z = policy_logits(policy, features);
  for (auto& v : z) v /= policy.temperature;
  return softmax(z);
}

RoutingDecision route_policy(const FeatureVector& features, const RoutingPolicy& policy) {
  RoutingDecision d;
  d.probabilities = policy_probabilities(policy, features.values);
  d.domain = argmax_domain(d.probabilities);
  d.source = RoutingSource::POLICY;
  return d;
}

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string extract_answer(std::string_view text) {
  static constexpr std::string_view kOpen = "<answer>";
  static constexpr std::string_view kClose = "</answer>";
  const auto lower = ascii_lower(text);
  // The first closing tag that has an opening tag before it; the content
  // starts at the nearest such opening tag.
  std::size_t search_from = 0;
  while (true) {
    const auto close = lower.find(kClose, search_from);
    if (close == std::string::npos) break;
    const auto open = lower.rfind(kOpen, close);
    if (open != std::string::npos && open + kOpen.size() <= close) {
      const auto begin = open + kOpen.size();
      return std::string(trim(text.substr(begin, close - begin)));
    }
    search_from = close + kClose.size();
  }
  throw Error(ErrorCode::MissingAnswerTag, "no well-formed <answer>...</answer> pair",
              std::string(text));
}

ForgeryDomain parse_answer_tags(std::string_view text) {
  auto content = extract_answer(text);
  for (auto& c : content) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (auto d = parse_domain(content)) return *d;
  throw Error(ErrorCode::UnknownLabel, "unknown track label '" + content + "'", std::string(text));
}

RoutingDecision Router::route(const ImageRecord& image, RoutingSource mode) const {
  if (mode == RoutingSource::EXTERNAL_ADAPTER) return route_external(image);
  return route_policy(extract_features(image), policy_);
}

RoutingDecision Router::route(const ImageRecord& image, const FeatureVector& features,
                              RoutingSource mode) const {
  if (mode == RoutingSource::EXTERNAL_ADAPTER) return route_external(image);
  return route_policy(features, policy_);
}

RoutingDecision Router::route_external(const ImageRecord& image) const {
  if (!adapter_) throw Error(ErrorCode::AdapterUnavailable, "no router adapter registered");
  AdapterRequest req;
  req.request_id = "route:" + image.id();
  req.task = AdapterTask::Route;
  req.image = &image;
  req.hints = json{{"prompt", kRouterPrompt}, {"prompt_version", kRouterPromptVersion}};
  const auto raw = adapter_->call(req, timeout_);
  const auto reply = parse_reply(raw, req);
  const auto& text = *reply.text;
  RoutingDecision d;
  d.source = RoutingSource::EXTERNAL_ADAPTER;
  d.raw_text = text;
  d.domain = parse_answer_tags(text);  // errors carry the raw text in detail()
  d.probabilities[index_of(d.domain)] = 1.0;
  return d;
}

}  // namespace unishield
