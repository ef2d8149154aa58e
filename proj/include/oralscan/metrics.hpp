#ifndef ORALSCAN_METRICS_HPP
#define ORALSCAN_METRICS_HPP

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

#include "oralscan/network.hpp"

namespace oralscan {

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Counts indexed [true][predicted].
struct ConfusionTally {
  std::array<std::array<long, kNumClasses>, kNumClasses> counts{};

  void add(ClassLabel truth, ClassLabel predicted) {
    ++counts[static_cast<std::size_t>(label_index(truth))][static_cast<std::size_t>(label_index(predicted))];
  }
  long total() const;
  long correct() const;
  /// trace / total; 0 for an empty tally.
  double accuracy() const;
};

/// A ratio whose denominator may be zero; value is 0 in that case and degenerate is set.
struct Ratio {
  double value = 0.0;
  bool degenerate = false;
};

Ratio precision(const ConfusionTally& tally, ClassLabel c);
Ratio recall(const ConfusionTally& tally, ClassLabel c);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
};

using PRCurve = std::vector<PRPoint>;

/// One point per prefix of the score-descending ranking (ties keep input order).
PRCurve pr_curve(std::span<const double> scores, const std::vector<bool>& truths);

/// All-point interpolated area under the curve.
double average_precision(const PRCurve& curve);

double mean_average_precision(std::span<const double> per_class_ap);

struct FitPoint {
  double pixel_count = 0.0;
  double accuracy = 0.0;
};

/// accuracy = slope * ln(pixel_count) + intercept
struct LogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LogFit log_fit(std::span<const FitPoint> points);

/// Per-class precision/recall/AP plus macro mAP and accuracy over a scored set.
struct EvalMetrics {
  ConfusionTally tally;
  std::array<Ratio, kNumClasses> precision{};
  std::array<Ratio, kNumClasses> recall{};
  /// AP per class; a class with no positives in the set gets 0 and is flagged.
  std::array<double, kNumClasses> average_precision{};
  std::array<bool, kNumClasses> ap_degenerate{};
  double mean_average_precision = 0.0;
  double accuracy = 0.0;
};

EvalMetrics evaluate(std::span<const Prediction> predictions, std::span<const ClassLabel> truths);

}  // namespace oralscan

#endif  // ORALSCAN_METRICS_HPP
