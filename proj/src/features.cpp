#include "unishield/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace unishield {

namespace {

constexpr double kEdgeThreshold = 32.0;  // on the 0..255 scale, i.e. 32/255
constexpr int kTextMinRuns = 4;
constexpr int kBlockSize = 8;

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

int signed_frequency(int k, int n) { return k > n / 2 ? k - n : k; }

std::vector<std::uint8_t> edge_map(std::span<const double> lum, int w, int h) {
  std::vector<std::uint8_t> edges(lum.size());
  auto at = [&](int x, int y) { return lum[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Forward difference, backward at the last column/row.
      double gx = 0.0;
      double gy = 0.0;
      if (w > 1) gx = x + 1 < w ? at(x + 1, y) - at(x, y) : at(x, y) - at(x - 1, y);
      if (h > 1) gy = y + 1 < h ? at(x, y + 1) - at(x, y) : at(x, y) - at(x, y - 1);
      edges[static_cast<std::size_t>(y) * w + x] = std::hypot(gx, gy) > kEdgeThreshold ? 1 : 0;
    }
  }
  return edges;
}

double residual_variance(std::span<const double> lum, int w, int h) {
  auto at = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return lum[static_cast<std::size_t>(y) * w + x];
  };
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double box = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) box += at(x + dx, y + dy);
      }
      const double r = at(x, y) - box / 9.0;
      sum += r;
      sum_sq += r * r;
    }
  }
  const double n = static_cast<double>(lum.size());
  const double mean = sum / n;
  return std::max(0.0, sum_sq / n - mean * mean);
}

double histogram_entropy(std::span<const double> lum) {
  std::array<std::size_t, 256> hist{};
  for (double v : lum) ++hist[static_cast<std::size_t>(std::clamp(std::lround(v), 0L, 255L))];
  const double n = static_cast<double>(lum.size());
  double entropy = 0.0;
  for (auto c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log(p);
  }
  return entropy;
}

double blockiness(std::span<const double> lum, int w, int h) {
  double grid_sum = 0.0;
  double off_sum = 0.0;
  std::size_t grid_n = 0;
  std::size_t off_n = 0;
  auto at = [&](int x, int y) { return lum[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const double d = std::abs(at(x + 1, y) - at(x, y));
      if ((x + 1) % kBlockSize == 0) {
        grid_sum += d;
        ++grid_n;
      } else {
        off_sum += d;
        ++off_n;
      }
    }
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double d = std::abs(at(x, y + 1) - at(x, y));
      if ((y + 1) % kBlockSize == 0) {
        grid_sum += d;
        ++grid_n;
      } else {
        off_sum += d;
        ++off_n;
      }
    }
  }
  if (grid_n == 0) return 0.0;
  const double off_mean = off_n == 0 ? 0.0 : off_sum / static_cast<double>(off_n);
  return std::max(0.0, grid_sum / static_cast<double>(grid_n) - off_mean);
}

}  // namespace

std::string_view feature_name(std::size_t index) {
  static constexpr std::array<std::string_view, kNumFeatures> kNames = {
      "high-frequency energy", "noise residual", "luminance entropy", "color saturation",
      "edge density",          "text-like structure", "skin-tone coverage", "compression blockiness"};
  return index < kNames.size() ? kNames[index] : "unknown";
}

std::vector<double> luminance(const ImageRecord& image) {
  const auto px = image.pixels();
  std::vector<double> lum(px.size() / 3);
  for (std::size_t i = 0; i < lum.size(); ++i) {
    lum[i] = 0.299 * px[i * 3] + 0.587 * px[i * 3 + 1] + 0.114 * px[i * 3 + 2];
  }
  return lum;
}

double high_frequency_ratio(std::span<const double> plane, int width, int height) {
  const std::size_t n = plane.size();
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(height, width, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) {
    buf[i][0] = plane[i];
    buf[i][1] = 0.0;
  }
  fftw_execute(plan);
  double total = 0.0;
  double high = 0.0;
  for (int ky = 0; ky < height; ++ky) {
    const int fy = std::abs(signed_frequency(ky, height));
    for (int kx = 0; kx < width; ++kx) {
      const int fx = std::abs(signed_frequency(kx, width));
      const auto& c = buf[static_cast<std::size_t>(ky) * width + kx];
      const double e = c[0] * c[0] + c[1] * c[1];
      total += e;
      if (4 * fx >= width || 4 * fy >= height) high += e;
    }
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  if (total <= 0.0) return 0.0;
  return std::clamp(high / total, 0.0, 1.0);
}

FeatureVector extract_features(const ImageRecord& image) {
  const int w = image.width();
  const int h = image.height();
  const auto lum = luminance(image);
  const auto px = image.pixels();

  FeatureVector f;
  f.values.assign(kNumFeatures, 0.0);
  f.values[kHighFreqRatio] = high_frequency_ratio(lum, w, h);
  f.values[kNoiseResidualVar] = residual_variance(lum, w, h);
  f.values[kLumaEntropy] = histogram_entropy(lum);

  double sat = 0.0;
  std::size_t skin = 0;
  const std::size_t npx = lum.size();
  for (std::size_t i = 0; i < npx; ++i) {
    const double r = px[i * 3];
    const double g = px[i * 3 + 1];
    const double b = px[i * 3 + 2];
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    if (mx > 0.0) sat += (mx - mn) / mx;
    const double cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    const double cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    if (cb >= 77.0 && cb <= 127.0 && cr >= 133.0 && cr <= 173.0) ++skin;
  }
  f.values[kMeanSaturation] = sat / static_cast<double>(npx);
  f.values[kFaceLikeness] = static_cast<double>(skin) / static_cast<double>(npx);

  const auto edges = edge_map(lum, w, h);
  f.values[kEdgeDensity] = static_cast<double>(std::count(edges.begin(), edges.end(), 1)) /
                           static_cast<double>(npx);
  int text_rows = 0;
  for (int y = 0; y < h; ++y) {
    int runs = 1;
    for (int x = 1; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      if (edges[i] != edges[i - 1]) ++runs;
    }
    if (runs >= kTextMinRuns) ++text_rows;
  }
  f.values[kTextLikeness] = static_cast<double>(text_rows) / static_cast<double>(h);
  f.values[kBlockiness] = blockiness(lum, w, h);
  return f;
}

}  // namespace unishield
