#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "unishield/transport.hpp"
#include "unishield/types.hpp"

namespace unishield {

enum class TransportKind { IN_PROCESS_STUB, SUBPROCESS_STDIO, HTTP };
std::string_view to_string(TransportKind t);
std::optional<TransportKind> parse_transport_kind(std::string_view token);

struct DetectorCapabilities {
  bool emits_mask = false;
  bool emits_explanation = false;
};

struct DetectorDescriptor {
  std::string detector_id;
  ForgeryDomain domain = ForgeryDomain::IMDL;
  ToolClass tool_class = ToolClass::NON_LLM_BASED;
  TransportKind transport = TransportKind::IN_PROCESS_STUB;
  std::string endpoint;
  DetectorCapabilities capabilities;
  int timeout_ms = 30000;
};

nlohmann::json descriptor_to_json(const DetectorDescriptor& d);
DetectorDescriptor descriptor_from_json(const nlohmann::json& j);

enum class MaskStyle { NONE, GT_ECHO, CENTER_BLOCK };
std::string_view to_string(MaskStyle m);
std::optional<MaskStyle> parse_mask_style(std::string_view token);

struct DetectionRates {
  double tpr = 1.0;
  double fpr = 0.0;
};

/// Synthetic detector. `cue_rates` overrides (tpr, fpr) for images whose
/// ground-truth hint carries a matching cue tag ("semantic", "artifact").
struct StubProfile {
  double tpr = 1.0;
  double fpr = 0.0;
  std::uint64_t seed_salt = 0;
  MaskStyle mask_style = MaskStyle::NONE;
  std::map<std::string, DetectionRates> cue_rates;

  DetectionRates rates_for(const std::optional<std::string>& cue) const;
};

nlohmann::json stub_profile_to_json(const StubProfile& p);
StubProfile stub_profile_from_json(const nlohmann::json& j);

/// Ground truth that stubs may consult. Only ever sent to in-process stubs.
struct GroundTruthHint {
  Verdict label = Verdict::REAL;
  std::optional<Mask> mask;
  std::optional<std::string> cue;
};

// Fixed stub confidences for the two verdicts.
inline constexpr double kStubFakeConfidence = 0.9;
inline constexpr double kStubRealConfidence = 0.1;

/// Uniform draw in [0,1) from FNV-1a over the id bytes followed by the salt's
/// 8 little-endian bytes, passed through the splitmix64 finalizer.
double stub_draw(std::string_view image_id, std::uint64_t seed_salt);

/// Deterministic synthetic verdict. Without a hint the image counts as REAL.
/// Masks are emitted for every verdict when mask_style != NONE: the style's
/// region on FAKE, all-zero on REAL. Throws Error{MissingMaskSource} for
/// GT_ECHO on a FAKE ground truth that has no mask.
DetectionResult run_stub(const StubProfile& profile, const ImageRecord& image,
                         const std::optional<GroundTruthHint>& gt_hint,
                         std::string detector_id = "stub",
                         bool emits_explanation = false);

nlohmann::json hint_to_json(const GroundTruthHint& hint);
std::optional<GroundTruthHint> hint_from_json(const nlohmann::json& hints);

/// In-process adapter wrapping run_stub(); replies go through the wire schema.
class StubTransport final : public Transport {
 public:
  StubTransport(StubProfile profile, DetectorDescriptor descriptor)
      : profile_(std::move(profile)), descriptor_(std::move(descriptor)) {}
  std::string call(const AdapterRequest& request, std::chrono::milliseconds timeout) override;
  const StubProfile& profile() const { return profile_; }

 private:
  StubProfile profile_;
  DetectorDescriptor descriptor_;
};

using DetectorKey = std::pair<ForgeryDomain, ToolClass>;

/// Descriptor table keyed by (domain, tool class); immutable once serving.
class Registry {
 public:
  /// Throws Error{InvalidDescriptor} or Error{DuplicateKey}.
  void register_detector(DetectorDescriptor descriptor);

  /// Throws Error{NoDetectorForKey}.
  const DetectorDescriptor& lookup(ForgeryDomain domain, ToolClass tool_class) const;
  bool contains(ForgeryDomain domain, ToolClass tool_class) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Descriptors in (domain, tool class) order.
  std::vector<DetectorDescriptor> list() const;

 private:
  std::map<DetectorKey, DetectorDescriptor> entries_;
};

/// The eight-tool table: (IMDL,NON_LLM)=iml-vit, (IMDL,LLM)=fakeshield,
/// (DMDL,NON_LLM)=ascformer, (DMDL,LLM)=dmdl-r1, (DFD,NON_LLM)=clip,
/// (DFD,LLM)=dfd-r1, (AIGCD,NON_LLM)=aide, (AIGCD,LLM)=fakevlm.
/// All entries are in-process stubs.
std::vector<DetectorDescriptor> default_descriptors();

/// Registry plus one transport per detector.
class Toolbox {
 public:
  /// Registers a descriptor with an explicit transport.
  void add(DetectorDescriptor descriptor, std::shared_ptr<Transport> transport);

  /// Registers a descriptor, creating its transport from `transport`/`endpoint`.
  /// IN_PROCESS_STUB descriptors use `stub` (default profile when absent).
  void add(DetectorDescriptor descriptor, std::optional<StubProfile> stub = std::nullopt);

  const Registry& registry() const { return registry_; }
  const DetectorDescriptor& lookup(ForgeryDomain d, ToolClass c) const { return registry_.lookup(d, c); }

  /// Replaces every transport with a counting wrapper and returns the
  /// wrappers keyed by detector id.
  std::map<std::string, std::shared_ptr<CountingTransport>> instrument();

  /// Exactly one adapter call. Ground truth is attached only for stub
  /// transports. Throws Error{Timeout|ProtocolViolation|AdapterError|
  /// AdapterUnavailable}.
  DetectionResult detect(const DetectorDescriptor& descriptor, const ImageRecord& image,
                         const std::optional<GroundTruthHint>& hint = std::nullopt) const;

  std::shared_ptr<Transport> transport_for(const std::string& detector_id) const;

  static Toolbox with_defaults(const StubProfile& profile = {});

 private:
  Registry registry_;
  std::map<std::string, std::shared_ptr<Transport>> transports_;
};

/// Converts a validated detect reply into a DetectionResult, enforcing mask
/// dimensions and the mask-capability rule. Throws Error{ProtocolViolation}.
DetectionResult interpret_detect_reply(const DetectorDescriptor& descriptor,
                                       const ImageRecord& image, const AdapterReply& reply);

}  // namespace unishield
