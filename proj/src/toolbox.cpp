#include "unishield/toolbox.hpp"

#include <chrono>

#include "unishield/encoding.hpp"
#include "unishield/error.hpp"
#include "unishield/rle.hpp"

namespace unishield {

using nlohmann::json;

std::string_view to_string(TransportKind t) {
  switch (t) {
    case TransportKind::IN_PROCESS_STUB: return "IN_PROCESS_STUB";
    case TransportKind::SUBPROCESS_STDIO: return "SUBPROCESS_STDIO";
    case TransportKind::HTTP: return "HTTP";
  }
  return "IN_PROCESS_STUB";
}

std::optional<TransportKind> parse_transport_kind(std::string_view token) {
  for (auto t : {TransportKind::IN_PROCESS_STUB, TransportKind::SUBPROCESS_STDIO, TransportKind::HTTP}) {
    if (to_string(t) == token) return t;
  }
  return std::nullopt;
}

std::string_view to_string(MaskStyle m) {
  switch (m) {
    case MaskStyle::NONE: return "NONE";
    case MaskStyle::GT_ECHO: return "GT_ECHO";
    case MaskStyle::CENTER_BLOCK: return "CENTER_BLOCK";
  }
  return "NONE";
}

std::optional<MaskStyle> parse_mask_style(std::string_view token) {
  for (auto m : {MaskStyle::NONE, MaskStyle::GT_ECHO, MaskStyle::CENTER_BLOCK}) {
    if (to_string(m) == token) return m;
  }
  return std::nullopt;
}

json descriptor_to_json(const DetectorDescriptor& d) {
  return json{{"detector_id", d.detector_id},
              {"domain", to_string(d.domain)},
              {"tool_class", to_string(d.tool_class)},
              {"transport", to_string(d.transport)},
              {"endpoint", d.endpoint},
              {"capabilities",
               {{"emits_mask", d.capabilities.emits_mask},
                {"emits_explanation", d.capabilities.emits_explanation}}},
              {"timeout_ms", d.timeout_ms}};
}

namespace {

template <typename T, typename Parse>
T parse_token(const json& j, const char* key, Parse parse) {
  const auto token = j.at(key).get<std::string>();
  auto v = parse(token);
  if (!v) throw Error(ErrorCode::InvalidDescriptor, std::string("bad ") + key + " '" + token + "'");
  return *v;
}

}  // namespace

DetectorDescriptor descriptor_from_json(const json& j) {
  try {
    DetectorDescriptor d;
    d.detector_id = j.at("detector_id").get<std::string>();
    d.domain = parse_token<ForgeryDomain>(j, "domain", parse_domain);
    d.tool_class = parse_token<ToolClass>(j, "tool_class", parse_tool_class);
    d.transport = j.contains("transport")
                      ? parse_token<TransportKind>(j, "transport", parse_transport_kind)
                      : TransportKind::IN_PROCESS_STUB;
    d.endpoint = j.value("endpoint", std::string());
    if (auto caps = j.find("capabilities"); caps != j.end()) {
      d.capabilities.emits_mask = caps->value("emits_mask", false);
      d.capabilities.emits_explanation = caps->value("emits_explanation", false);
    } else {
      d.capabilities.emits_mask = requires_localization(d.domain);
      d.capabilities.emits_explanation = d.tool_class == ToolClass::LLM_BASED;
    }
    d.timeout_ms = j.value("timeout_ms", 30000);
    return d;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidDescriptor, std::string("invalid descriptor: ") + e.what());
  }
}

DetectionRates StubProfile::rates_for(const std::optional<std::string>& cue) const {
  if (cue) {
    if (auto it = cue_rates.find(*cue); it != cue_rates.end()) return it->second;
  }
  return {tpr, fpr};
}

json stub_profile_to_json(const StubProfile& p) {
  json cues = json::object();
  for (const auto& [cue, r] : p.cue_rates) cues[cue] = {{"tpr", r.tpr}, {"fpr", r.fpr}};
  return json{{"tpr", p.tpr},
              {"fpr", p.fpr},
              {"seed_salt", p.seed_salt},
              {"mask_style", to_string(p.mask_style)},
              {"cue_rates", cues}};
}

StubProfile stub_profile_from_json(const json& j) {
  try {
    StubProfile p;
    p.tpr = j.value("tpr", 1.0);
    p.fpr = j.value("fpr", 0.0);
    p.seed_salt = j.value("seed_salt", std::uint64_t{0});
    if (j.contains("mask_style")) {
      p.mask_style = parse_token<MaskStyle>(j, "mask_style", parse_mask_style);
    }
    if (auto cues = j.find("cue_rates"); cues != j.end()) {
      for (const auto& [cue, r] : cues->items()) {
        p.cue_rates[cue] = {r.at("tpr").get<double>(), r.at("fpr").get<double>()};
      }
    }
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    bool ok = in_unit(p.tpr) && in_unit(p.fpr);
    for (const auto& [cue, r] : p.cue_rates) ok = ok && in_unit(r.tpr) && in_unit(r.fpr);
    if (!ok) throw Error(ErrorCode::InvalidArgument, "stub rates must lie in [0,1]");
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid stub profile: ") + e.what());
  }
}

double stub_draw(std::string_view image_id, std::uint64_t seed_salt) {
  std::uint8_t salt[8];
  for (int i = 0; i < 8; ++i) salt[i] = static_cast<std::uint8_t>(seed_salt >> (8 * i));
  // FNV-1a alone leaves draws for neighbouring salts strongly correlated, so
  // the hash goes through the splitmix64 finalizer first.
  std::uint64_t h = fnv1a64(std::span<const std::uint8_t>(salt, 8), fnv1a64(image_id));
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return unit_interval(h ^ (h >> 31));
}

namespace {

Mask center_block(int w, int h) {
  Mask m(w, h);
  const int bw = w / 2;
  const int bh = h / 2;
  const int x0 = (w - bw) / 2;
  const int y0 = (h - bh) / 2;
  for (int y = y0; y < y0 + bh; ++y) {
    for (int x = x0; x < x0 + bw; ++x) m.set(x, y, true);
  }
  return m;
}

}  // namespace

DetectionResult run_stub(const StubProfile& profile, const ImageRecord& image,
                         const std::optional<GroundTruthHint>& gt_hint, std::string detector_id,
                         bool emits_explanation) {
  const Verdict truth = gt_hint ? gt_hint->label : Verdict::REAL;
  const auto rates = profile.rates_for(gt_hint ? gt_hint->cue : std::nullopt);
  const double u = stub_draw(image.id(), profile.seed_salt);
  const double p_fake = truth == Verdict::FAKE ? rates.tpr : rates.fpr;

  DetectionResult r;
  r.detector_id = std::move(detector_id);
  r.verdict = u < p_fake ? Verdict::FAKE : Verdict::REAL;
  r.confidence = r.verdict == Verdict::FAKE ? kStubFakeConfidence : kStubRealConfidence;

  if (profile.mask_style != MaskStyle::NONE) {
    if (r.verdict == Verdict::REAL) {
      r.mask = Mask(image.width(), image.height());
    } else if (profile.mask_style == MaskStyle::CENTER_BLOCK) {
      r.mask = center_block(image.width(), image.height());
    } else if (gt_hint && gt_hint->mask) {
      if (gt_hint->mask->width() != image.width() || gt_hint->mask->height() != image.height()) {
        throw Error(ErrorCode::DimensionMismatch, "ground-truth mask does not match image size");
      }
      r.mask = gt_hint->mask;
    } else if (truth == Verdict::REAL) {
      // A false positive on an authentic image echoes its empty ground truth.
      r.mask = Mask(image.width(), image.height());
    } else {
      throw Error(ErrorCode::MissingMaskSource, "GT_ECHO stub has no ground-truth mask for " + image.id());
    }
  }
  if (emits_explanation) {
    r.explanation = r.verdict == Verdict::FAKE
                        ? "The " + r.detector_id + " detector found traces of forgery in this image. "
                              "Its synthetic profile flagged the content as manipulated."
                        : "The " + r.detector_id + " detector found no trace of forgery in this image. "
                              "Its synthetic profile judged the content authentic.";
  }
  return r;
}

json hint_to_json(const GroundTruthHint& hint) {
  json j{{"gt_label", to_string(hint.label)}};
  j["gt_mask_rle"] = hint.mask ? json(encode_mask_rle(*hint.mask)) : json(nullptr);
  j["cue"] = hint.cue ? json(*hint.cue) : json(nullptr);
  return j;
}

std::optional<GroundTruthHint> hint_from_json(const json& hints) {
  if (!hints.is_object() || !hints.contains("gt_label")) return std::nullopt;
  GroundTruthHint h;
  const auto label = parse_verdict(hints.at("gt_label").get<std::string>());
  if (!label) throw Error(ErrorCode::InvalidArgument, "bad gt_label hint");
  h.label = *label;
  if (auto m = hints.find("gt_mask_rle"); m != hints.end() && m->is_string()) {
    h.mask = decode_mask_rle(m->get<std::string>());
  }
  if (auto c = hints.find("cue"); c != hints.end() && c->is_string()) h.cue = c->get<std::string>();
  return h;
}

std::string StubTransport::call(const AdapterRequest& request, std::chrono::milliseconds) {
  if (request.task != AdapterTask::Detect || request.image == nullptr) {
    return make_error_reply(request.request_id, "stub adapters only serve task=detect").dump();
  }
  try {
    const auto r = run_stub(profile_, *request.image, hint_from_json(request.hints),
                            descriptor_.detector_id, descriptor_.capabilities.emits_explanation);
    auto reply = make_ok_reply(request.request_id);
    reply["verdict"] = to_string(r.verdict);
    reply["confidence"] = r.confidence;
    if (r.mask) reply["mask_rle"] = encode_mask_rle(*r.mask);
    if (r.explanation) reply["explanation"] = *r.explanation;
    return reply.dump();
  } catch (const Error& e) {
    return make_error_reply(request.request_id,
                            std::string(to_string(e.code())) + ": " + e.what())
        .dump();
  }
}

void Registry::register_detector(DetectorDescriptor d) {
  if (d.detector_id.empty()) throw Error(ErrorCode::InvalidDescriptor, "detector_id must be non-empty");
  if (requires_localization(d.domain) && !d.capabilities.emits_mask) {
    throw Error(ErrorCode::InvalidDescriptor,
                d.detector_id + ": " + std::string(to_string(d.domain)) + " detectors must emit masks");
  }
  if (d.timeout_ms <= 0) throw Error(ErrorCode::InvalidDescriptor, d.detector_id + ": timeout_ms must be positive");
  if (d.transport != TransportKind::IN_PROCESS_STUB && d.endpoint.empty()) {
    throw Error(ErrorCode::InvalidDescriptor, d.detector_id + ": external transports need an endpoint");
  }
  const DetectorKey key{d.domain, d.tool_class};
  if (entries_.count(key) != 0) {
    throw Error(ErrorCode::DuplicateKey, "a detector is already registered for (" +
                                             std::string(to_string(d.domain)) + ", " +
                                             std::string(to_string(d.tool_class)) + ")");
  }
  for (const auto& [k, existing] : entries_) {
    if (existing.detector_id == d.detector_id) {
      throw Error(ErrorCode::DuplicateKey, "detector id already registered: " + d.detector_id);
    }
  }
  entries_.emplace(key, std::move(d));
}

const DetectorDescriptor& Registry::lookup(ForgeryDomain domain, ToolClass tool_class) const {
  auto it = entries_.find({domain, tool_class});
  if (it == entries_.end()) {
    throw Error(ErrorCode::NoDetectorForKey, "no detector registered for (" +
                                                 std::string(to_string(domain)) + ", " +
                                                 std::string(to_string(tool_class)) + ")");
  }
  return it->second;
}

bool Registry::contains(ForgeryDomain domain, ToolClass tool_class) const {
  return entries_.count({domain, tool_class}) != 0;
}

std::vector<DetectorDescriptor> Registry::list() const {
  std::vector<DetectorDescriptor> out;
  out.reserve(entries_.size());
  for (const auto& [k, d] : entries_) out.push_back(d);
  return out;
}

std::vector<DetectorDescriptor> default_descriptors() {
  struct Row {
    ForgeryDomain domain;
    ToolClass tool_class;
    const char* id;
  };
  static constexpr Row kTable[] = {
      {ForgeryDomain::IMDL, ToolClass::NON_LLM_BASED, "iml-vit"},
      {ForgeryDomain::IMDL, ToolClass::LLM_BASED, "fakeshield"},
      {ForgeryDomain::DMDL, ToolClass::NON_LLM_BASED, "ascformer"},
      {ForgeryDomain::DMDL, ToolClass::LLM_BASED, "dmdl-r1"},
      {ForgeryDomain::DFD, ToolClass::NON_LLM_BASED, "clip"},
      {ForgeryDomain::DFD, ToolClass::LLM_BASED, "dfd-r1"},
      {ForgeryDomain::AIGCD, ToolClass::NON_LLM_BASED, "aide"},
      {ForgeryDomain::AIGCD, ToolClass::LLM_BASED, "fakevlm"},
  };
  std::vector<DetectorDescriptor> out;
  for (const auto& row : kTable) {
    DetectorDescriptor d;
    d.detector_id = row.id;
    d.domain = row.domain;
    d.tool_class = row.tool_class;
    d.transport = TransportKind::IN_PROCESS_STUB;
    d.capabilities.emits_mask = requires_localization(row.domain);
    d.capabilities.emits_explanation = row.tool_class == ToolClass::LLM_BASED;
    out.push_back(std::move(d));
  }
  return out;
}

void Toolbox::add(DetectorDescriptor descriptor, std::shared_ptr<Transport> transport) {
  const auto id = descriptor.detector_id;
  registry_.register_detector(std::move(descriptor));
  transports_[id] = std::move(transport);
}

void Toolbox::add(DetectorDescriptor descriptor, std::optional<StubProfile> stub) {
  std::shared_ptr<Transport> transport;
  switch (descriptor.transport) {
    case TransportKind::IN_PROCESS_STUB: {
      StubProfile profile = stub.value_or(StubProfile{});
      // Localizing stubs must produce a mask on FAKE verdicts; the others never do.
      if (descriptor.capabilities.emits_mask && profile.mask_style == MaskStyle::NONE) {
        profile.mask_style = MaskStyle::CENTER_BLOCK;
      } else if (!descriptor.capabilities.emits_mask) {
        profile.mask_style = MaskStyle::NONE;
      }
      transport = std::make_shared<StubTransport>(std::move(profile), descriptor);
      break;
    }
    case TransportKind::SUBPROCESS_STDIO:
      transport = std::make_shared<StdioTransport>(descriptor.endpoint);
      break;
    case TransportKind::HTTP:
      transport = std::make_shared<HttpTransport>(descriptor.endpoint);
      break;
  }
  add(std::move(descriptor), std::move(transport));
}

std::map<std::string, std::shared_ptr<CountingTransport>> Toolbox::instrument() {
  std::map<std::string, std::shared_ptr<CountingTransport>> out;
  for (auto& [id, t] : transports_) {
    auto counting = std::make_shared<CountingTransport>(t);
    t = counting;
    out[id] = std::move(counting);
  }
  return out;
}

std::shared_ptr<Transport> Toolbox::transport_for(const std::string& detector_id) const {
  auto it = transports_.find(detector_id);
  return it == transports_.end() ? nullptr : it->second;
}

DetectionResult interpret_detect_reply(const DetectorDescriptor& descriptor,
                                       const ImageRecord& image, const AdapterReply& reply) {
  DetectionResult r;
  r.detector_id = descriptor.detector_id;
  r.verdict = *reply.verdict;
  r.confidence = *reply.confidence;
  r.explanation = reply.explanation;
  if (reply.mask_rle) {
    try {
      r.mask = decode_mask_rle(*reply.mask_rle);
    } catch (const Error& e) {
      throw Error(ErrorCode::ProtocolViolation, std::string("protocol violation: bad mask_rle: ") + e.what());
    }
    if (r.mask->width() != image.width() || r.mask->height() != image.height()) {
      throw Error(ErrorCode::ProtocolViolation, "protocol violation: mask dimensions differ from image");
    }
  }
  if (r.verdict == Verdict::FAKE && descriptor.capabilities.emits_mask && !r.mask) {
    throw Error(ErrorCode::ProtocolViolation,
                "protocol violation: " + descriptor.detector_id + " declares masks but sent none");
  }
  return r;
}

DetectionResult Toolbox::detect(const DetectorDescriptor& descriptor, const ImageRecord& image,
                                const std::optional<GroundTruthHint>& hint) const {
  auto transport = transport_for(descriptor.detector_id);
  if (!transport) {
    throw Error(ErrorCode::AdapterUnavailable, "no transport for " + descriptor.detector_id);
  }
  AdapterRequest req;
  req.request_id = descriptor.detector_id + ":" + image.id();
  req.task = AdapterTask::Detect;
  req.image = &image;
  req.domain = descriptor.domain;
  if (hint && descriptor.transport == TransportKind::IN_PROCESS_STUB) req.hints = hint_to_json(*hint);

  const auto start = std::chrono::steady_clock::now();
  const auto raw = transport->call(req, std::chrono::milliseconds(descriptor.timeout_ms));
  const auto elapsed = std::chrono::steady_clock::now() - start;
  if (elapsed > std::chrono::milliseconds(descriptor.timeout_ms)) {
    throw Error(ErrorCode::Timeout, descriptor.detector_id + " exceeded " +
                                        std::to_string(descriptor.timeout_ms) + " ms");
  }
  auto result = interpret_detect_reply(descriptor, image, parse_reply(raw, req));
  result.latency_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  return result;
}

Toolbox Toolbox::with_defaults(const StubProfile& profile) {
  Toolbox box;
  std::uint64_t salt = profile.seed_salt;
  for (auto& d : default_descriptors()) {
    StubProfile p = profile;
    p.seed_salt = salt++;
    box.add(std::move(d), p);
  }
  return box;
}

}  // namespace unishield
