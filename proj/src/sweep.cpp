#include "oralscan/sweep.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "oralscan/inference.hpp"

namespace oralscan {

using nlohmann::json;

namespace {

std::optional<double> tagged_accuracy(const DatasetManifest& manifest, const std::vector<const SweepRecord*>& rows,
                                      HardwareTag tag) {
  long n = 0;
  long correct = 0;
  for (const SweepRecord* r : rows) {
    const ManifestEntry& e = manifest.entries[r->entry];
    if (e.hardware != tag) continue;
    ++n;
    correct += r->prediction.label == e.label;
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(n);
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

SweepReport run_sweep(const Model<float>& model, const DatasetManifest& manifest,
                      const std::vector<ResolutionTier>& tiers, const SweepRunInfo& run) {
  if (tiers.empty()) throw std::invalid_argument("sweep needs at least one tier");
  if (std::set<ResolutionTier>(tiers.begin(), tiers.end()).size() != tiers.size()) {
    throw std::invalid_argument("sweep tiers must be distinct");
  }
  if (manifest.entries.empty()) throw std::invalid_argument("sweep manifest is empty");

  SweepReport report;
  report.manifest_digest = manifest.digest;
  report.run = run;
  report.records.reserve(manifest.size() * tiers.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const Image img = read_image(manifest.resolve(manifest.entries[i]));
    for (ResolutionTier tier : tiers) {
      const Classification c = classify(model, img, tier);
      report.records.push_back({i, tier, c.processed_width, c.processed_height, img.height <= tier_height(tier),
                                c.prediction});
    }
  }

  std::vector<FitPoint> points;
  for (ResolutionTier tier : tiers) {
    std::vector<const SweepRecord*> rows;
    std::vector<Prediction> preds;
    std::vector<ClassLabel> truths;
    for (const SweepRecord& r : report.records) {
      if (r.tier != tier) continue;
      rows.push_back(&r);
      preds.push_back(r.prediction);
      truths.push_back(manifest.entries[r.entry].label);
    }
    const EvalMetrics m = evaluate(preds, truths);
    TierSummary s;
    s.tier = tier;
    for (ClassLabel c : kAllLabels) {
      const auto k = static_cast<std::size_t>(label_index(c));
      s.class_images[k] = static_cast<long>(std::count(truths.begin(), truths.end(), c));
      if (s.class_images[k] > 0) s.class_accuracy[k] = m.recall[k].value;
    }
    s.accuracy = m.accuracy;
    s.mean_average_precision = m.mean_average_precision;
    s.with_hardware_accuracy = tagged_accuracy(manifest, rows, HardwareTag::With);
    s.without_hardware_accuracy = tagged_accuracy(manifest, rows, HardwareTag::Without);
    report.tiers.push_back(s);
    points.push_back({static_cast<double>(tier_pixel_count(tier)), s.accuracy});
  }

  if (points.size() >= 2) {
    report.fit = log_fit(points);
  } else {
    report.fit_notice = "log fit omitted: needs at least two distinct tier pixel counts";
  }
  return report;
}

json report_json(const SweepReport& report, const DatasetManifest& manifest) {
  json tiers = json::array();
  for (const TierSummary& s : report.tiers) {
    json classes = json::object();
    for (ClassLabel c : kAllLabels) {
      const auto k = static_cast<std::size_t>(label_index(c));
      classes[std::string(label_name(c))] = {{"images", s.class_images[k]},
                                             {"accuracy", optional_number(s.class_accuracy[k])}};
    }
    json t = {{"tier", tier_name(s.tier)},
              {"height", tier_height(s.tier)},
              {"pixel_count", tier_pixel_count(s.tier)},
              {"accuracy", s.accuracy},
              {"mean_average_precision", s.mean_average_precision},
              {"classes", classes}};
    if (s.with_hardware_accuracy || s.without_hardware_accuracy) {
      t["hardware"] = {{"with", optional_number(s.with_hardware_accuracy)},
                       {"without", optional_number(s.without_hardware_accuracy)}};
    }
    tiers.push_back(t);
  }

  json records = json::array();
  for (const SweepRecord& r : report.records) {
    const ManifestEntry& e = manifest.entries[r.entry];
    records.push_back({{"path", e.path},
                       {"label", label_name(e.label)},
                       {"tier", tier_name(r.tier)},
                       {"width", r.width},
                       {"height", r.height},
                       {"native", r.native},
                       {"predicted", label_name(r.prediction.label)},
                       {"confidence", r.prediction.confidence}});
  }

  json out = {
      {"metadata",
       {{"checkpoint_digest", report.run.checkpoint_digest},
        {"manifest_digest", report.manifest_digest},
        {"seed", report.run.seed},
        {"timestamp", report.run.timestamp},
        {"images", manifest.size()},
        {"predictions", report.records.size()},
        {"class_accuracy", "per-class recall: fraction of that class's images labelled correctly"},
        {"fit_x", "canonical 16:9 tier pixel count"},
        {"native", "images at or below a tier's height are evaluated unchanged, never upsampled"}}},
      {"tiers", tiers},
      {"log_fit", report.fit ? json{{"slope", report.fit->slope},
                                    {"intercept", report.fit->intercept},
                                    {"r2", report.fit->r2}}
                             : json(nullptr)},
      {"records", records}};
  if (!report.fit) out["log_fit_notice"] = report.fit_notice;
  return out;
}

std::string report_csv(const SweepReport& report) {
  std::ostringstream out;
  out << "tier,height,pixel_count,class,accuracy\n";
  auto row = [&](const TierSummary& s, std::string_view cls, const std::optional<double>& acc) {
    out << tier_name(s.tier) << ',' << tier_height(s.tier) << ',' << tier_pixel_count(s.tier) << ',' << cls << ',';
    if (acc) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", *acc);
      out << buf;
    }
    out << '\n';
  };
  for (const TierSummary& s : report.tiers) {
    for (ClassLabel c : kAllLabels) row(s, label_name(c), s.class_accuracy[static_cast<std::size_t>(label_index(c))]);
    row(s, "overall", s.accuracy);
  }
  return out.str();
}

}  // namespace oralscan
