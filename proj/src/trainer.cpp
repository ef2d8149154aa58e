#include "oralscan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "oralscan/imaging.hpp"

namespace oralscan {

void HyperParams::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and non-negative");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw std::invalid_argument("eval_fraction must lie in (0, 1)");
}

Index iterations_per_epoch(Index n_train, Index batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (n_train < 0) throw std::invalid_argument("training set size must be non-negative");
  return n_train / batch_size;
}

DatasetSplit split_dataset(const DatasetManifest& manifest, double eval_fraction, std::uint64_t seed) {
  if (manifest.entries.empty()) throw std::invalid_argument("cannot split an empty manifest");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw std::invalid_argument("eval_fraction must lie in (0, 1)");

  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    by_class[static_cast<std::size_t>(label_index(manifest.entries[i].label))].push_back(i);
  }
  for (ClassLabel label : kAllLabels) {
    if (by_class[static_cast<std::size_t>(label_index(label))].size() == 1) {
      throw std::invalid_argument("class " + std::string(label_name(label)) + " has a single sample; need at least 2");
    }
  }

  std::mt19937_64 rng(seed);
  DatasetSplit split;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_eval = static_cast<std::size_t>(std::floor(static_cast<double>(members.size()) * eval_fraction));
    split.eval.insert(split.eval.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_eval));
    split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_eval), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.eval.begin(), split.eval.end());
  return split;
}

std::vector<Sample> load_samples(const DatasetManifest& manifest, std::span<const std::size_t> indices, Index side) {
  std::vector<Sample> samples;
  samples.reserve(indices.size());
  for (std::size_t i : indices) {
    const ManifestEntry& e = manifest.entries.at(i);
    samples.push_back({to_input_tensor(read_image(manifest.resolve(e)), side), e.label});
  }
  return samples;
}

EvalMetrics evaluate_model(const Model<float>& model, std::span<const Sample> samples) {
  std::vector<Prediction> preds;
  std::vector<ClassLabel> truths;
  preds.reserve(samples.size());
  truths.reserve(samples.size());
  for (const Sample& s : samples) {
    preds.push_back(predict(model, s.input));
    truths.push_back(s.label);
  }
  return evaluate(preds, truths);
}

TrainHistory train(Model<float>& model, std::span<const Sample> train_set, std::span<const Sample> eval_set,
                   const HyperParams& hp, const ProgressSink& progress) {
  hp.validate();
  const Index n_iter = iterations_per_epoch(static_cast<Index>(train_set.size()), hp.batch_size);
  if (n_iter < 1) {
    throw TrainingError("empty epoch: " + std::to_string(train_set.size()) + " training samples with batch size " +
                        std::to_string(hp.batch_size));
  }

  const auto params = model.parameters();
  std::vector<Tensor<float>> velocity;
  for (const Tensor<float>* p : params) velocity.emplace_back(p->shape());

  const auto lr = static_cast<float>(hp.learning_rate);
  const auto mu = static_cast<float>(hp.momentum);
  const float inv_batch = 1.0f / static_cast<float>(hp.batch_size);

  std::mt19937_64 rng(hp.seed);
  std::vector<std::size_t> order(train_set.size());
  TrainHistory history;

  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;

    for (Index it = 0; it < n_iter; ++it) {
      std::vector<Tensor<float>> grad_sum;
      for (const Tensor<float>* p : params) grad_sum.emplace_back(p->shape());
      double batch_loss = 0.0;
      for (Index b = 0; b < hp.batch_size; ++b) {
        const Sample& s = train_set[order[static_cast<std::size_t>(it * hp.batch_size + b)]];
        auto fwd = forward(model, s.input);
        const auto ce = cross_entropy(softmax(fwd.logits), label_index(s.label));
        batch_loss += ce.loss;
        const auto grads = backward(model, fwd.cache, ce.grad_logits);
        for (std::size_t k = 0; k < grads.size(); ++k) grad_sum[k].values() += grads[k].values();
      }
      batch_loss /= static_cast<double>(hp.batch_size);
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                            std::to_string(it + 1));
      }
      for (std::size_t k = 0; k < params.size(); ++k) {
        velocity[k].values() = mu * velocity[k].values() - (lr * inv_batch) * grad_sum[k].values();
        params[k]->values() += velocity[k].values();
      }
      ++history.updates;
      loss_sum += batch_loss;
      if (progress) progress({epoch, static_cast<long>(it + 1), batch_loss});
    }

    history.epochs.push_back({epoch, loss_sum / static_cast<double>(n_iter), evaluate_model(model, eval_set)});
  }
  return history;
}

}  // namespace oralscan
