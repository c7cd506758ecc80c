#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "unishield/ensemble.hpp"
#include "unishield/metrics.hpp"

namespace unishield {

struct ManifestEntry {
  std::string image_path;
  Verdict gt_verdict = Verdict::REAL;
  ForgeryDomain gt_domain = ForgeryDomain::IMDL;
  std::optional<std::string> gt_mask_path;
  std::string split = "test";
  std::optional<std::string> cue;  // optional fixture tag forwarded to stubs
};

/// One JSON-lines record. Throws Error{InvalidArgument}.
ManifestEntry manifest_entry_from_json(const nlohmann::json& j);
nlohmann::json manifest_entry_to_json(const ManifestEntry& e);

/// Reads a JSON-lines manifest; blank lines are skipped and relative paths
/// resolve against the manifest's directory. Throws Error{IoError} or
/// Error{InvalidArgument} (with the line number).
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

struct MetricsSummary {
  MetricValue acc;
  MetricValue img_f1;
  MetricValue pix_precision;
  MetricValue pix_recall;
  MetricValue pix_f1;
  MetricValue iou;
  MetricValue auc;
  MetricValue routing_accuracy;
  std::size_t n_images = 0;  // successfully evaluated
  std::size_t n_fake = 0;
  std::size_t n_errors = 0;
  // Images contributing a defined value to each pixel metric.
  std::size_t support_precision = 0;
  std::size_t support_recall = 0;
  std::size_t support_f1 = 0;
  std::size_t support_iou = 0;
};

nlohmann::json summary_to_json(const MetricsSummary& s);

struct EvaluationReport {
  std::map<std::string, MetricsSummary> per_domain;  // track tokens plus "ALL"
  std::vector<nlohmann::json> trace;                 // one record per manifest entry, in order
  nlohmann::json metadata;
  std::size_t detector_calls = 0;

  nlohmann::json summary_json() const;
  std::string summary_table() const;
};

struct EvalOptions {
  int max_in_flight = 1;
  double threshold = 0.5;  // recorded only; verdicts are detector-native
  std::optional<std::string> split;
};

using ImageLoader = std::function<ImageRecord(const ManifestEntry&)>;
using MaskLoader = std::function<std::optional<Mask>(const ManifestEntry&)>;

ImageRecord load_entry_image(const ManifestEntry& entry);
std::optional<Mask> load_entry_mask(const ManifestEntry& entry);

/// Runs `mode` on every entry. Per-image failures are recorded in the trace
/// (status "ERROR") and never abort the sweep. Pixel metrics are computed
/// per image where both masks exist and macro-averaged, skipping undefined
/// values.
EvaluationReport evaluate(std::span<const ManifestEntry> manifest, EnsembleMode mode,
                          const Pipeline& pipeline, const EvalOptions& options = {},
                          const ImageLoader& load_image = load_entry_image,
                          const MaskLoader& load_mask = load_entry_mask);

}  // namespace unishield
