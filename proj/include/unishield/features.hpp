#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "unishield/types.hpp"

namespace unishield {

inline constexpr int kFeatureSchemaVersion = 1;
inline constexpr std::size_t kNumFeatures = 8;

// Positions in the fixed feature schema.
enum FeatureIndex : std::size_t {
  kHighFreqRatio = 0,   // spectral energy outside the central quarter / total, [0,1]
  kNoiseResidualVar,    // variance of 3x3 high-pass residual, squared 8-bit units
  kLumaEntropy,         // 256-bin luminance histogram entropy, nats
  kMeanSaturation,      // HSV saturation mean, [0,1]
  kEdgeDensity,         // fraction of pixels with gradient magnitude > 32/255
  kTextLikeness,        // fraction of rows whose edge map has >= 4 runs
  kFaceLikeness,        // fraction of pixels in the YCbCr skin box
  kBlockiness,          // 8x8 grid discontinuity minus off-grid baseline, >= 0
};

std::string_view feature_name(std::size_t index);

struct FeatureVector {
  std::vector<double> values;
  int schema_version = kFeatureSchemaVersion;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Deterministic 8-feature summary of an image.
FeatureVector extract_features(const ImageRecord& image);

/// Rec.601 luma per pixel in [0,255].
std::vector<double> luminance(const ImageRecord& image);

/// Fraction of spectral energy of a row-major real plane lying outside the
/// low-frequency box |fx| < W/4, |fy| < H/4. 0 for an all-zero plane.
double high_frequency_ratio(std::span<const double> plane, int width, int height);

}  // namespace unishield
