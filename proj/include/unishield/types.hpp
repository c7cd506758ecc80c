#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace unishield {

// Declaration order doubles as the routing tie-break order.
enum class ForgeryDomain : std::uint8_t { IMDL = 0, DMDL = 1, DFD = 2, AIGCD = 3 };
inline constexpr std::array<ForgeryDomain, 4> kAllDomains = {
    ForgeryDomain::IMDL, ForgeryDomain::DMDL, ForgeryDomain::DFD, ForgeryDomain::AIGCD};
inline constexpr std::size_t kNumDomains = kAllDomains.size();

enum class ToolClass : std::uint8_t { LLM_BASED = 0, NON_LLM_BASED = 1 };
inline constexpr std::array<ToolClass, 2> kAllToolClasses = {ToolClass::LLM_BASED,
                                                             ToolClass::NON_LLM_BASED};

enum class Verdict : std::uint8_t { REAL = 0, FAKE = 1 };

std::string_view to_string(ForgeryDomain d);
std::string_view to_string(ToolClass c);
std::string_view to_string(Verdict v);

// Exact-token parsers; nullopt for anything outside the closed sets.
std::optional<ForgeryDomain> parse_domain(std::string_view token);
std::optional<ToolClass> parse_tool_class(std::string_view token);
std::optional<Verdict> parse_verdict(std::string_view token);

inline std::size_t index_of(ForgeryDomain d) { return static_cast<std::size_t>(d); }

// Domains whose tools must localize as well as detect.
inline bool requires_localization(ForgeryDomain d) {
  return d == ForgeryDomain::IMDL || d == ForgeryDomain::DMDL;
}

/// Binary tamper map, row-major, 1 = tampered.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height);  // all zero
  Mask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool on) { bits_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0; }

  std::size_t count() const noexcept;
  bool empty_region() const noexcept { return count() == 0; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

using Rgb = std::array<std::uint8_t, 3>;

/// Decoded input image. Immutable; copies share the underlying buffers.
class ImageRecord {
 public:
  ImageRecord() = default;

  /// Decodes PNG or baseline JPEG bytes. Throws Error{DecodeError}.
  static ImageRecord decode(std::string id, std::vector<std::uint8_t> bytes);

  /// Builds a record from RGB pixels, encoding them as PNG for `bytes()`.
  static ImageRecord from_pixels(std::string id, int width, int height,
                                 std::vector<std::uint8_t> rgb);

  const std::string& id() const noexcept { return id_; }
  std::span<const std::uint8_t> bytes() const noexcept { return *bytes_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const std::uint8_t> pixels() const noexcept { return *pixels_; }

  Rgb pixel(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    const auto& p = *pixels_;
    return {p[i], p[i + 1], p[i + 2]};
  }

 private:
  std::string id_;
  std::shared_ptr<const std::vector<std::uint8_t>> bytes_ =
      std::make_shared<const std::vector<std::uint8_t>>();
  int width_ = 0;
  int height_ = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> pixels_ =
      std::make_shared<const std::vector<std::uint8_t>>();
};

/// FAKE iff confidence >= threshold. Throws OutOfRange when confidence is
/// outside [0,1] or threshold outside (0,1).
Verdict verdict_from_confidence(double confidence, double threshold = 0.5);

struct DetectionResult {
  std::string detector_id;
  Verdict verdict = Verdict::REAL;
  double confidence = 0.0;  // P(FAKE)
  std::optional<Mask> mask;
  std::optional<std::string> explanation;
  double latency_ms = 0.0;
};

struct ReportDetection {
  Verdict verdict = Verdict::REAL;
  double confidence = 0.0;
  ForgeryDomain domain = ForgeryDomain::IMDL;
  ToolClass tool_class = ToolClass::NON_LLM_BASED;
  std::string detector_id;

  friend bool operator==(const ReportDetection&, const ReportDetection&) = default;
};

struct ReportLocalization {
  Mask mask;
  std::string region_summary;

  friend bool operator==(const ReportLocalization&, const ReportLocalization&) = default;
};

struct ForensicReport {
  std::string description;
  ReportDetection detection;
  std::optional<ReportLocalization> localization;
  std::string judgment_basis;

  friend bool operator==(const ForensicReport&, const ForensicReport&) = default;
};

}  // namespace unishield
