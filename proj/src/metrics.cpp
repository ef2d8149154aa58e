#include "oralscan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Dense>

namespace oralscan {

long ConfusionTally::total() const {
  long n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), 0L);
  return n;
}

long ConfusionTally::correct() const {
  long n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

double ConfusionTally::accuracy() const {
  const long n = total();
  return n == 0 ? 0.0 : static_cast<double>(correct()) / static_cast<double>(n);
}

namespace {

Ratio ratio(long num, long den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

Ratio precision(const ConfusionTally& tally, ClassLabel c) {
  const auto k = static_cast<std::size_t>(label_index(c));
  long predicted = 0;
  for (const auto& row : tally.counts) predicted += row[k];
  return ratio(tally.counts[k][k], predicted);
}

Ratio recall(const ConfusionTally& tally, ClassLabel c) {
  const auto k = static_cast<std::size_t>(label_index(c));
  const auto& row = tally.counts[k];
  return ratio(row[k], std::accumulate(row.begin(), row.end(), 0L));
}

PRCurve pr_curve(std::span<const double> scores, const std::vector<bool>& truths) {
  if (scores.size() != truths.size()) throw MetricsError("pr_curve: scores and truths differ in length");
  const auto positives = std::count(truths.begin(), truths.end(), true);
  if (positives == 0) throw MetricsError("pr_curve: no positive samples");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  PRCurve curve;
  curve.reserve(order.size());
  long tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (truths[order[rank]]) ++tp;
    curve.push_back({static_cast<double>(tp) / static_cast<double>(positives),
                     static_cast<double>(tp) / static_cast<double>(rank + 1)});
  }
  return curve;
}

double average_precision(const PRCurve& curve) {
  // Interpolated precision at point i is the best precision at any point with recall >= r_i,
  // which for a recall-sorted curve is the suffix maximum.
  std::vector<double> envelope(curve.size());
  double best = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    best = std::max(best, curve[i].precision);
    envelope[i] = best;
  }
  double ap = 0.0;
  double previous_recall = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    ap += (curve[i].recall - previous_recall) * envelope[i];
    previous_recall = curve[i].recall;
  }
  return ap;
}

double mean_average_precision(std::span<const double> per_class_ap) {
  if (per_class_ap.empty()) return 0.0;
  return std::accumulate(per_class_ap.begin(), per_class_ap.end(), 0.0) / static_cast<double>(per_class_ap.size());
}

LogFit log_fit(std::span<const FitPoint> points) {
  std::set<double> distinct;
  for (const FitPoint& p : points) {
    if (!(p.pixel_count > 0.0)) throw MetricsError("log_fit: pixel counts must be positive");
    distinct.insert(p.pixel_count);
  }
  if (distinct.size() < 2) throw MetricsError("log_fit: need at least 2 distinct pixel counts");

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = std::log(points[static_cast<std::size_t>(i)].pixel_count);
    design(i, 1) = 1.0;
    y[i] = points[static_cast<std::size_t>(i)].accuracy;
  }

  LogFit fit;
  if (y.maxCoeff() == y.minCoeff()) {
    // Constant response: the least-squares line is flat and exact.
    fit.intercept = y[0];
    fit.r2 = 1.0;
    return fit;
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(y);
  fit.slope = coef[0];
  fit.intercept = coef[1];
  const double ss_res = (y - design * coef).squaredNorm();
  const double ss_tot = (y.array() - y.mean()).matrix().squaredNorm();
  fit.r2 = 1.0 - ss_res / ss_tot;
  return fit;
}

EvalMetrics evaluate(std::span<const Prediction> predictions, std::span<const ClassLabel> truths) {
  if (predictions.size() != truths.size()) throw MetricsError("evaluate: predictions and truths differ in length");
  EvalMetrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) m.tally.add(truths[i], predictions[i].label);
  for (ClassLabel c : kAllLabels) {
    const auto k = static_cast<std::size_t>(label_index(c));
    m.precision[k] = precision(m.tally, c);
    m.recall[k] = recall(m.tally, c);
    std::vector<double> scores;
    std::vector<bool> is_c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      scores.push_back(predictions[i].distribution[k]);
      is_c.push_back(truths[i] == c);
    }
    if (std::find(is_c.begin(), is_c.end(), true) == is_c.end()) {
      m.average_precision[k] = 0.0;
      m.ap_degenerate[k] = true;
    } else {
      m.average_precision[k] = average_precision(pr_curve(scores, is_c));
    }
  }
  m.mean_average_precision = mean_average_precision(m.average_precision);
  m.accuracy = m.tally.accuracy();
  return m;
}

}  // namespace oralscan
