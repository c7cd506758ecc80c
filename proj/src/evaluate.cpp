#include "unishield/evaluate.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "unishield/error.hpp"
#include "unishield/image_io.hpp"

namespace unishield {

using nlohmann::json;

ManifestEntry manifest_entry_from_json(const json& j) {
  try {
    ManifestEntry e;
    e.image_path = j.at("image").get<std::string>();
    if (e.image_path.empty()) throw Error(ErrorCode::InvalidArgument, "empty image path");
    const auto label = parse_verdict(j.at("label").get<std::string>());
    if (!label) throw Error(ErrorCode::InvalidArgument, "label must be REAL or FAKE");
    e.gt_verdict = *label;
    const auto domain = parse_domain(j.at("domain").get<std::string>());
    if (!domain) throw Error(ErrorCode::InvalidArgument, "domain must be one of the four tracks");
    e.gt_domain = *domain;
    if (auto m = j.find("mask"); m != j.end() && !m->is_null()) e.gt_mask_path = m->get<std::string>();
    e.split = j.value("split", std::string("test"));
    if (auto c = j.find("cue"); c != j.end() && !c->is_null()) e.cue = c->get<std::string>();
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad manifest entry: ") + ex.what());
  }
}

json manifest_entry_to_json(const ManifestEntry& e) {
  json j{{"image", e.image_path},
         {"label", to_string(e.gt_verdict)},
         {"domain", to_string(e.gt_domain)},
         {"mask", e.gt_mask_path ? json(*e.gt_mask_path) : json(nullptr)},
         {"split", e.split}};
  if (e.cue) j["cue"] = *e.cue;
  return j;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? p : (base / fp).string();
  };
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto e = manifest_entry_from_json(json::parse(line));
      e.image_path = resolve(e.image_path);
      if (e.gt_mask_path) e.gt_mask_path = resolve(*e.gt_mask_path);
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::InvalidArgument,
                  path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    } catch (const Error& ex) {
      throw Error(ErrorCode::InvalidArgument,
                  path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

ImageRecord load_entry_image(const ManifestEntry& entry) { return load_image(entry.image_path); }

std::optional<Mask> load_entry_mask(const ManifestEntry& entry) {
  if (!entry.gt_mask_path) return std::nullopt;
  return decode_mask_image(read_file(*entry.gt_mask_path));
}

namespace {

json metric_json(const MetricValue& v) { return v ? json(*v) : json("UNDEFINED"); }

std::string metric_text(const MetricValue& v) {
  if (!v) return "UNDEF";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

struct ItemResult {
  bool ok = false;
  Verdict truth = Verdict::REAL;
  Verdict predicted = Verdict::REAL;
  double confidence = 0.0;
  std::optional<ForgeryDomain> routed;
  std::optional<PixelMetrics> pixel;
  std::size_t calls = 0;
  json trace;
};

ItemResult evaluate_one(std::size_t index, const ManifestEntry& entry, EnsembleMode mode,
                        const Pipeline& pipeline, const ImageLoader& load_image,
                        const MaskLoader& load_mask) {
  ItemResult r;
  r.truth = entry.gt_verdict;
  r.trace = json{{"index", index},
                 {"image", entry.image_path},
                 {"gt_label", to_string(entry.gt_verdict)},
                 {"gt_domain", to_string(entry.gt_domain)}};
  try {
    const auto image = load_image(entry);
    auto gt_mask = load_mask(entry);
    if (gt_mask && (gt_mask->width() != image.width() || gt_mask->height() != image.height())) {
      throw Error(ErrorCode::DimensionMismatch, "ground-truth mask does not match image size");
    }
    GroundTruthHint hint{entry.gt_verdict, gt_mask, entry.cue};
    auto outcome = run_ensemble(mode, image, pipeline, std::nullopt, hint);
    r.calls = outcome.detector_calls;
    r.ok = true;
    r.predicted = outcome.result.verdict;
    r.confidence = outcome.result.confidence;
    if (outcome.routing) r.routed = outcome.routing->domain;
    if (gt_mask && outcome.result.mask) r.pixel = pixel_metrics(*outcome.result.mask, *gt_mask);

    r.trace["status"] = "OK";
    r.trace["image_id"] = image.id();
    r.trace["predicted"] = to_string(r.predicted);
    r.trace["confidence"] = r.confidence;
    r.trace["detector_id"] = outcome.result.detector_id;
    r.trace["routed_domain"] = r.routed ? json(to_string(*r.routed)) : json(nullptr);
    if (outcome.run) r.trace["tool_class"] = to_string(outcome.run->schedule.tool_class);
    if (r.pixel) {
      r.trace["pixel"] = {{"precision", metric_json(r.pixel->precision)},
                          {"recall", metric_json(r.pixel->recall)},
                          {"f1", metric_json(r.pixel->f1)},
                          {"iou", metric_json(r.pixel->iou)}};
    }
  } catch (const Error& e) {
    r.ok = false;
    r.trace["status"] = "ERROR";
    r.trace["error"] = to_string(e.code());
    r.trace["stage"] = to_string(e.stage());
    r.trace["message"] = e.what();
  } catch (const std::exception& e) {
    r.ok = false;
    r.trace["status"] = "ERROR";
    r.trace["error"] = "Internal";
    r.trace["stage"] = "none";
    r.trace["message"] = e.what();
  }
  return r;
}

MetricsSummary summarize(const std::vector<const ItemResult*>& items) {
  MetricsSummary s;
  std::vector<VerdictPair> pairs;
  std::vector<ScoredLabel> scored;
  double sums[4] = {0, 0, 0, 0};
  for (const auto* it : items) {
    if (!it->ok) {
      ++s.n_errors;
      continue;
    }
    ++s.n_images;
    if (it->truth == Verdict::FAKE) ++s.n_fake;
    pairs.push_back({it->predicted, it->truth});
    scored.push_back({it->confidence, it->truth});
    if (it->pixel) {
      const MetricValue* v[4] = {&it->pixel->precision, &it->pixel->recall, &it->pixel->f1, &it->pixel->iou};
      std::size_t* support[4] = {&s.support_precision, &s.support_recall, &s.support_f1, &s.support_iou};
      for (int k = 0; k < 4; ++k) {
        if (*v[k]) {
          sums[k] += **v[k];
          ++*support[k];
        }
      }
    }
  }
  if (!pairs.empty()) {
    const auto m = image_metrics(pairs);
    s.acc = m.acc;
    s.img_f1 = m.img_f1;
    try {
      s.auc = auc(scored);
    } catch (const Error&) {
    }
  }
  auto mean = [](double sum, std::size_t n) -> MetricValue {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  };
  s.pix_precision = mean(sums[0], s.support_precision);
  s.pix_recall = mean(sums[1], s.support_recall);
  s.pix_f1 = mean(sums[2], s.support_f1);
  s.iou = mean(sums[3], s.support_iou);
  return s;
}

}  // namespace

json summary_to_json(const MetricsSummary& s) {
  return json{{"acc", metric_json(s.acc)},
              {"img_f1", metric_json(s.img_f1)},
              {"pix_precision", metric_json(s.pix_precision)},
              {"pix_recall", metric_json(s.pix_recall)},
              {"pix_f1", metric_json(s.pix_f1)},
              {"iou", metric_json(s.iou)},
              {"auc", metric_json(s.auc)},
              {"routing_accuracy", metric_json(s.routing_accuracy)},
              {"n_images", s.n_images},
              {"n_fake", s.n_fake},
              {"n_errors", s.n_errors},
              {"support",
               {{"pix_precision", s.support_precision},
                {"pix_recall", s.support_recall},
                {"pix_f1", s.support_f1},
                {"iou", s.support_iou}}}};
}

json EvaluationReport::summary_json() const {
  json j;
  j["metadata"] = metadata;
  json domains = json::object();
  for (const auto& [name, s] : per_domain) domains[name] = summary_to_json(s);
  j["domains"] = domains;
  return j;
}

std::string EvaluationReport::summary_table() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-6s %7s %7s %7s %7s %7s %7s %7s %7s %6s %6s %6s\n", "domain", "ACC",
                "Img-F1", "Pix-P", "Pix-R", "Pix-F1", "IoU", "AUC", "Route", "n", "fake", "err");
  out << line;
  auto row = [&](const std::string& name, const MetricsSummary& s) {
    std::snprintf(line, sizeof line, "%-6s %7s %7s %7s %7s %7s %7s %7s %7s %6zu %6zu %6zu\n", name.c_str(),
                  metric_text(s.acc).c_str(), metric_text(s.img_f1).c_str(),
                  metric_text(s.pix_precision).c_str(), metric_text(s.pix_recall).c_str(),
                  metric_text(s.pix_f1).c_str(), metric_text(s.iou).c_str(), metric_text(s.auc).c_str(),
                  metric_text(s.routing_accuracy).c_str(), s.n_images, s.n_fake, s.n_errors);
    out << line;
  };
  for (auto d : kAllDomains) {
    if (auto it = per_domain.find(std::string(to_string(d))); it != per_domain.end()) {
      row(it->first, it->second);
    }
  }
  if (auto it = per_domain.find("ALL"); it != per_domain.end()) row("ALL", it->second);
  return out.str();
}

EvaluationReport evaluate(std::span<const ManifestEntry> manifest, EnsembleMode mode,
                          const Pipeline& pipeline, const EvalOptions& options,
                          const ImageLoader& load_image, const MaskLoader& load_mask) {
  std::vector<const ManifestEntry*> selected;
  for (const auto& e : manifest) {
    if (!options.split || e.split == *options.split) selected.push_back(&e);
  }
  std::vector<ItemResult> results(selected.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < selected.size(); i = next.fetch_add(1)) {
      results[i] = evaluate_one(i, *selected[i], mode, pipeline, load_image, load_mask);
    }
  };
  const auto n_workers = static_cast<std::size_t>(std::max(1, options.max_in_flight));
  if (n_workers == 1 || selected.size() < 2) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(n_workers, selected.size()); ++w) pool.emplace_back(worker);
  }

  EvaluationReport report;
  std::map<std::string, std::vector<const ItemResult*>> groups;
  std::vector<const ItemResult*> all;
  std::map<std::string, std::vector<RoutedPair>> routed;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const auto key = std::string(to_string(selected[i]->gt_domain));
    groups[key].push_back(&r);
    all.push_back(&r);
    report.detector_calls += r.calls;
    if (r.ok && r.routed) {
      routed[key].push_back({*r.routed, selected[i]->gt_domain});
      routed["ALL"].push_back({*r.routed, selected[i]->gt_domain});
    }
    report.trace.push_back(r.trace);
  }
  for (const auto& [key, items] : groups) report.per_domain[key] = summarize(items);
  report.per_domain["ALL"] = summarize(all);
  for (auto& [key, s] : report.per_domain) {
    if (auto it = routed.find(key); it != routed.end() && !it->second.empty()) {
      s.routing_accuracy = routing_accuracy(it->second);
    }
  }
  report.metadata = json{{"mode", to_cli_token(mode)},
                         {"n_entries", selected.size()},
                         {"verdict_source", "detector-native"},
                         {"threshold", options.threshold},
                         {"pixel_averaging", "per-image macro average; undefined values excluded"},
                         {"both_empty_masks", "scored 1.0"},
                         {"detector_calls", report.detector_calls}};
  return report;
}

}  // namespace unishield
