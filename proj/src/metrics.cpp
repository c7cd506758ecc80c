#include "unishield/metrics.hpp"

#include <algorithm>

#include "unishield/error.hpp"

namespace unishield {

namespace {
MetricValue ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}
}  // namespace

ImageMetrics image_metrics(std::span<const VerdictPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "image_metrics needs at least one pair");
  std::size_t correct = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (const auto& p : pairs) {
    if (p.predicted == p.truth) ++correct;
    if (p.predicted == Verdict::FAKE && p.truth == Verdict::FAKE) ++tp;
    if (p.predicted == Verdict::FAKE && p.truth == Verdict::REAL) ++fp;
    if (p.predicted == Verdict::REAL && p.truth == Verdict::FAKE) ++fn;
  }
  ImageMetrics m;
  m.acc = static_cast<double>(correct) / static_cast<double>(pairs.size());
  m.img_f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  return m;
}

PixelCounts pixel_counts(const Mask& pred, const Mask& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw Error(ErrorCode::DimensionMismatch, "predicted and ground-truth masks differ in size");
  }
  PixelCounts c;
  const auto a = pred.bits();
  const auto b = gt.bits();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) ++c.tp;
    else if (a[i]) ++c.fp;
    else if (b[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

PixelMetrics pixel_metrics(const Mask& pred, const Mask& gt) {
  const auto c = pixel_counts(pred, gt);
  if (c.tp + c.fp + c.fn == 0) return {1.0, 1.0, 1.0, 1.0};
  const double tp = static_cast<double>(c.tp);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  return {ratio(tp, tp + fp), ratio(tp, tp + fn), ratio(2 * tp, 2 * tp + fp + fn),
          ratio(tp, tp + fp + fn)};
}

double auc(std::span<const ScoredLabel> scored) {
  std::vector<ScoredLabel> sorted(scored.begin(), scored.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.confidence < b.confidence; });
  double n_pos = 0.0;
  double n_neg = 0.0;
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].confidence == sorted[i].confidence) ++j;
    // Midrank of the tie block, 1-based.
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (sorted[k].truth == Verdict::FAKE) {
        rank_sum_pos += midrank;
        n_pos += 1.0;
      } else {
        n_neg += 1.0;
      }
    }
    i = j;
  }
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw Error(ErrorCode::DegenerateClasses, "AUC needs both FAKE and REAL examples");
  }
  return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double routing_accuracy(std::span<const RoutedPair> decisions) {
  if (decisions.empty()) throw Error(ErrorCode::EmptyInput, "routing_accuracy needs decisions");
  const auto correct = std::count_if(decisions.begin(), decisions.end(),
                                     [](const RoutedPair& p) { return p.predicted == p.truth; });
  return static_cast<double>(correct) / static_cast<double>(decisions.size());
}

double routing_accuracy(std::span<const std::pair<RoutingDecision, ForgeryDomain>> decisions) {
  std::vector<RoutedPair> pairs;
  pairs.reserve(decisions.size());
  for (const auto& [d, gt] : decisions) pairs.push_back({d.domain, gt});
  return routing_accuracy(pairs);
}

}  // namespace unishield
