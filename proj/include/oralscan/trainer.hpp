#ifndef ORALSCAN_TRAINER_HPP
#define ORALSCAN_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "oralscan/dataset.hpp"
#include "oralscan/metrics.hpp"
#include "oralscan/network.hpp"

namespace oralscan {

struct HyperParams {
  Index batch_size = 32;
  int epochs = 20;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double eval_fraction = 0.2;
  std::uint64_t seed = 42;

  void validate() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// floor(n_train / batch_size); the trailing partial batch is dropped.
Index iterations_per_epoch(Index n_train, Index batch_size);

struct DatasetSplit {
  std::vector<std::size_t> train;  // indices into the manifest, ascending
  std::vector<std::size_t> eval;
};

/// Stratified seeded split; each class contributes floor(count * eval_fraction) to eval.
DatasetSplit split_dataset(const DatasetManifest& manifest, double eval_fraction, std::uint64_t seed);

struct Sample {
  Tensor<float> input;
  ClassLabel label = ClassLabel::Cancerous;
};

/// Reads and prepares the listed manifest entries at full resolution.
std::vector<Sample> load_samples(const DatasetManifest& manifest, std::span<const std::size_t> indices, Index side);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  EvalMetrics eval;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  long updates = 0;
};

struct ProgressEvent {
  int epoch = 0;      // 1-based
  long iteration = 0; // 1-based within the epoch
  double loss = 0.0;  // mean cross-entropy of the batch
};

using ProgressSink = std::function<void(const ProgressEvent&)>;

EvalMetrics evaluate_model(const Model<float>& model, std::span<const Sample> samples);

/// Momentum SGD (v <- mu v - lr g; w <- w + v) over seeded per-epoch shuffles.
TrainHistory train(Model<float>& model, std::span<const Sample> train_set, std::span<const Sample> eval_set,
                   const HyperParams& hp, const ProgressSink& progress = {});

}  // namespace oralscan

#endif  // ORALSCAN_TRAINER_HPP
