#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "unishield/router.hpp"
#include "unishield/types.hpp"

namespace unishield {

// nullopt stands for an undefined (0/0) metric.
using MetricValue = std::optional<double>;

struct ImageMetrics {
  double acc = 0.0;
  MetricValue img_f1;  // FAKE is the positive class
};

struct VerdictPair {
  Verdict predicted = Verdict::REAL;
  Verdict truth = Verdict::REAL;
};

/// Throws Error{EmptyInput}.
ImageMetrics image_metrics(std::span<const VerdictPair> pairs);

struct PixelCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
};

struct PixelMetrics {
  MetricValue precision;
  MetricValue recall;
  MetricValue f1;
  MetricValue iou;
};

/// Throws Error{DimensionMismatch}.
PixelCounts pixel_counts(const Mask& pred, const Mask& gt);

/// Tampered = positive. Two all-zero masks score 1.0 on every metric.
PixelMetrics pixel_metrics(const Mask& pred, const Mask& gt);

struct ScoredLabel {
  double confidence = 0.0;
  Verdict truth = Verdict::REAL;
};

/// Mann-Whitney AUC with ties counted one half, computed from ranks in
/// O(n log n). Throws Error{DegenerateClasses} unless both classes occur.
double auc(std::span<const ScoredLabel> scored);

struct RoutedPair {
  ForgeryDomain predicted = ForgeryDomain::IMDL;
  ForgeryDomain truth = ForgeryDomain::IMDL;
};

/// Throws Error{EmptyInput}.
double routing_accuracy(std::span<const RoutedPair> decisions);
double routing_accuracy(std::span<const std::pair<RoutingDecision, ForgeryDomain>> decisions);

}  // namespace unishield
