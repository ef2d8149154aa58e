#ifndef ORALSCAN_SWEEP_HPP
#define ORALSCAN_SWEEP_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oralscan/dataset.hpp"
#include "oralscan/imaging.hpp"
#include "oralscan/metrics.hpp"
#include "oralscan/network.hpp"

namespace oralscan {

struct SweepRunInfo {
  std::string checkpoint_digest;
  std::uint64_t seed = 0;
  std::string timestamp;
};

/// One prediction: a manifest image evaluated at one tier.
struct SweepRecord {
  std::size_t entry = 0;  // index into the manifest
  ResolutionTier tier = ResolutionTier::R144;
  int width = 0;          // geometry fed to the network input stage
  int height = 0;
  bool native = false;    // source already at or below the tier height
  Prediction prediction;
};

struct TierSummary {
  ResolutionTier tier = ResolutionTier::R144;
  std::array<long, kNumClasses> class_images{};
  /// Per-class accuracy is per-class recall; unset when the class has no images.
  std::array<std::optional<double>, kNumClasses> class_accuracy{};
  double accuracy = 0.0;
  double mean_average_precision = 0.0;
  std::optional<double> with_hardware_accuracy;
  std::optional<double> without_hardware_accuracy;
};

struct SweepReport {
  std::string manifest_digest;
  SweepRunInfo run;
  std::vector<TierSummary> tiers;
  std::vector<SweepRecord> records;
  std::optional<LogFit> fit;
  std::string fit_notice;  // why the fit is absent, if it is
};

/// Every manifest image at every tier: degrade -> to_input_tensor -> predict.
SweepReport run_sweep(const Model<float>& model, const DatasetManifest& manifest,
                      const std::vector<ResolutionTier>& tiers, const SweepRunInfo& run);

nlohmann::json report_json(const SweepReport& report, const DatasetManifest& manifest);
/// Columns tier,height,pixel_count,class,accuracy; one row per tier per class plus an overall row.
std::string report_csv(const SweepReport& report);

}  // namespace oralscan

#endif  // ORALSCAN_SWEEP_HPP
