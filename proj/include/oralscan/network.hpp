#ifndef ORALSCAN_NETWORK_HPP
#define ORALSCAN_NETWORK_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oralscan/layers.hpp"
#include "oralscan/tensor.hpp"

namespace oralscan {

/// Integer codes are part of the checkpoint and wire formats.
enum class ClassLabel : int { Cancerous = 0, NonCancerous = 1, Negative = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<ClassLabel, kNumClasses> kAllLabels = {ClassLabel::Cancerous, ClassLabel::NonCancerous,
                                                                   ClassLabel::Negative};

inline constexpr int label_index(ClassLabel label) { return static_cast<int>(label); }

inline ClassLabel label_from_index(int index) {
  if (index < 0 || index >= kNumClasses) throw std::out_of_range("class index " + std::to_string(index));
  return static_cast<ClassLabel>(index);
}

inline std::string_view label_name(ClassLabel label) {
  switch (label) {
    case ClassLabel::Cancerous: return "cancerous";
    case ClassLabel::NonCancerous: return "non_cancerous";
    case ClassLabel::Negative: return "negative";
  }
  return "unknown";
}

inline std::optional<ClassLabel> parse_label(std::string_view name) {
  for (ClassLabel label : kAllLabels) {
    if (label_name(label) == name) return label;
  }
  return std::nullopt;
}

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ConvStage {
  Index filters = 0;
  Index kernel_size = 3;
  friend bool operator==(const ConvStage&, const ConvStage&) = default;
};

struct ModelConfig {
  Index input_size = 128;
  std::vector<ConvStage> conv_stages = {{16, 3}, {32, 3}, {64, 3}};
  Index hidden_units = 128;
  Index num_classes = kNumClasses;
  std::uint64_t seed = 42;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  void validate() const {
    if (conv_stages.empty()) throw ConfigError("model needs at least one conv stage");
    if (input_size < 1) throw ConfigError("input_size must be positive");
    const Index divisor = Index{1} << conv_stages.size();
    if (input_size % divisor != 0) {
      throw ConfigError("input_size " + std::to_string(input_size) + " is not divisible by 2^" +
                        std::to_string(conv_stages.size()));
    }
    for (const ConvStage& s : conv_stages) {
      if (s.filters < 1) throw ConfigError("conv stage filters must be >= 1");
      if (s.kernel_size < 1 || s.kernel_size % 2 == 0) {
        throw ConfigError("conv kernel size must be odd, got " + std::to_string(s.kernel_size));
      }
    }
    if (hidden_units < 1) throw ConfigError("hidden_units must be >= 1");
    if (num_classes != kNumClasses) throw ConfigError("num_classes must be 3");
  }

  Index final_side() const { return input_size >> conv_stages.size(); }
  Index flattened_size() const { return conv_stages.back().filters * final_side() * final_side(); }
};

inline constexpr Index kInputChannels = 3;

/// Counts parameters from the configuration alone.
inline Index parameter_count(const ModelConfig& config) {
  config.validate();
  Index count = 0;
  Index channels = kInputChannels;
  for (const ConvStage& s : config.conv_stages) {
    count += s.filters * channels * s.kernel_size * s.kernel_size + s.filters;
    channels = s.filters;
  }
  count += config.hidden_units * config.flattened_size() + config.hidden_units;
  count += config.num_classes * config.hidden_units + config.num_classes;
  return count;
}

template <typename Scalar>
struct Model {
  ModelConfig config;
  std::vector<ConvKernelSet<Scalar>> stages;
  DenseLayer<Scalar> hidden;
  DenseLayer<Scalar> output;

  /// Canonical parameter order: per stage (weights, bias), hidden (weights, bias), output (weights, bias).
  std::vector<Tensor<Scalar>*> parameters() {
    std::vector<Tensor<Scalar>*> params;
    for (auto& s : stages) {
      params.push_back(&s.weights);
      params.push_back(&s.bias);
    }
    for (DenseLayer<Scalar>* d : {&hidden, &output}) {
      params.push_back(&d->weights);
      params.push_back(&d->bias);
    }
    return params;
  }

  std::vector<const Tensor<Scalar>*> parameters() const {
    std::vector<const Tensor<Scalar>*> params;
    for (Tensor<Scalar>* p : const_cast<Model*>(this)->parameters()) params.push_back(p);
    return params;
  }

  Index allocated_parameters() const {
    Index n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto* p : parameters()) h = oralscan::checksum(*p, h);
    return h;
  }

  template <typename Other>
  Model<Other> cast() const {
    Model<Other> m;
    m.config = config;
    for (const auto& s : stages) {
      m.stages.emplace_back(s.weights.template cast<Other>(), s.bias.template cast<Other>(), s.stride, s.padding);
    }
    m.hidden = {hidden.weights.template cast<Other>(), hidden.bias.template cast<Other>()};
    m.output = {output.weights.template cast<Other>(), output.bias.template cast<Other>()};
    return m;
  }
};

/// Shapes of every parameter tensor in canonical order.
inline std::vector<Shape> parameter_shapes(const ModelConfig& config) {
  config.validate();
  std::vector<Shape> shapes;
  Index channels = kInputChannels;
  for (const ConvStage& s : config.conv_stages) {
    shapes.push_back({s.filters, channels, s.kernel_size, s.kernel_size});
    shapes.push_back({s.filters});
    channels = s.filters;
  }
  shapes.push_back({config.hidden_units, config.flattened_size()});
  shapes.push_back({config.hidden_units});
  shapes.push_back({config.num_classes, config.hidden_units});
  shapes.push_back({config.num_classes});
  return shapes;
}

/// All-zero parameters with the shapes implied by config.
template <typename Scalar>
Model<Scalar> build_zeroed(const ModelConfig& config) {
  const auto shapes = parameter_shapes(config);
  Model<Scalar> m;
  m.config = config;
  std::size_t i = 0;
  for (const ConvStage& s : config.conv_stages) {
    m.stages.emplace_back(Tensor<Scalar>(shapes[i]), Tensor<Scalar>(shapes[i + 1]), 1, s.kernel_size / 2);
    i += 2;
  }
  m.hidden = {Tensor<Scalar>(shapes[i]), Tensor<Scalar>(shapes[i + 1])};
  m.output = {Tensor<Scalar>(shapes[i + 2]), Tensor<Scalar>(shapes[i + 3])};
  return m;
}

/// He-normal weights (std = sqrt(2 / fan_in)) and zero biases from a seeded generator.
template <typename Scalar>
Model<Scalar> build(const ModelConfig& config) {
  Model<Scalar> m = build_zeroed<Scalar>(config);
  std::mt19937_64 rng(config.seed);
  auto fill = [&rng](Tensor<Scalar>& w, Index fan_in) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (Index i = 0; i < w.size(); ++i) w[i] = static_cast<Scalar>(normal(rng));
  };
  for (auto& s : m.stages) fill(s.weights, s.patch_size());
  fill(m.hidden.weights, m.hidden.weights.dim(1));
  fill(m.output.weights, m.output.weights.dim(1));
  return m;
}

template <typename Scalar>
struct StageCache {
  Tensor<Scalar> input;
  Tensor<Scalar> pre_activation;
  Tensor<Scalar> activation;
  PoolIndexMap pool;
};

/// Everything backward needs from one forward pass.
template <typename Scalar>
struct ForwardCache {
  ModelConfig config;
  std::vector<StageCache<Scalar>> stages;
  Tensor<Scalar> flattened;
  Tensor<Scalar> hidden_pre;
  Tensor<Scalar> hidden_act;
};

template <typename Scalar>
struct ForwardResult {
  Tensor<Scalar> logits;
  ForwardCache<Scalar> cache;
};

template <typename Scalar>
ForwardResult<Scalar> forward(const Model<Scalar>& model, const Tensor<Scalar>& input) {
  const Index side = model.config.input_size;
  require_shape(input.shape(), {kInputChannels, side, side}, "network input");

  ForwardResult<Scalar> result;
  result.cache.config = model.config;
  Tensor<Scalar> x = input;
  for (const auto& stage : model.stages) {
    StageCache<Scalar> sc;
    sc.input = x;
    sc.pre_activation = conv2d_forward(x, stage);
    sc.activation = relu_forward(sc.pre_activation);
    auto [pooled, map] = maxpool2_forward(sc.activation);
    sc.pool = std::move(map);
    x = std::move(pooled);
    result.cache.stages.push_back(std::move(sc));
  }
  result.cache.flattened = x.reshaped({x.size()});
  result.cache.hidden_pre = dense_forward(result.cache.flattened, model.hidden.weights, model.hidden.bias);
  result.cache.hidden_act = relu_forward(result.cache.hidden_pre);
  result.logits = dense_forward(result.cache.hidden_act, model.output.weights, model.output.bias);
  return result;
}

/// Gradients in Model::parameters() order.
template <typename Scalar>
using ParamGrads = std::vector<Tensor<Scalar>>;

template <typename Scalar>
ParamGrads<Scalar> backward(const Model<Scalar>& model, const ForwardCache<Scalar>& cache,
                            const Tensor<Scalar>& grad_logits) {
  if (!(cache.config == model.config) || cache.stages.size() != model.stages.size()) {
    throw std::invalid_argument("backward: forward cache was produced by a different model configuration");
  }
  require_shape(grad_logits.shape(), {model.config.num_classes}, "backward grad_logits");
  require_shape(cache.hidden_act.shape(), {model.config.hidden_units}, "backward cached hidden activation");

  const std::size_t n_stages = model.stages.size();
  ParamGrads<Scalar> grads(2 * n_stages + 4);

  auto out = dense_backward(cache.hidden_act, model.output.weights, grad_logits);
  grads[2 * n_stages + 2] = std::move(out.weights);
  grads[2 * n_stages + 3] = std::move(out.bias);

  const Tensor<Scalar> g_hidden_pre = relu_backward(cache.hidden_pre, out.input);
  auto hid = dense_backward(cache.flattened, model.hidden.weights, g_hidden_pre);
  grads[2 * n_stages] = std::move(hid.weights);
  grads[2 * n_stages + 1] = std::move(hid.bias);

  Tensor<Scalar> g = hid.input.reshaped(cache.stages.back().pool.output_shape);
  for (std::size_t s = n_stages; s-- > 0;) {
    const StageCache<Scalar>& sc = cache.stages[s];
    const Tensor<Scalar> g_act = maxpool2_backward(sc.pool, g);
    const Tensor<Scalar> g_pre = relu_backward(sc.pre_activation, g_act);
    auto conv = conv2d_backward(sc.input, model.stages[s], g_pre);
    grads[2 * s] = std::move(conv.weights);
    grads[2 * s + 1] = std::move(conv.bias);
    g = std::move(conv.input);
  }
  return grads;
}

struct Prediction {
  ClassLabel label = ClassLabel::Cancerous;
  std::array<double, kNumClasses> distribution{};
  double confidence = 0.0;
};

/// Softmax over logits; argmax ties resolve to the lowest class index.
template <typename Scalar>
Prediction prediction_from_logits(const Tensor<Scalar>& logits) {
  require_shape(logits.shape(), {kNumClasses}, "prediction logits");
  const Tensor<Scalar> probs = softmax(logits);
  Prediction p;
  int best = 0;
  for (int i = 0; i < kNumClasses; ++i) {
    p.distribution[static_cast<std::size_t>(i)] = static_cast<double>(probs[i]);
    if (probs[i] > probs[best]) best = i;
  }
  p.label = label_from_index(best);
  p.confidence = p.distribution[static_cast<std::size_t>(best)];
  return p;
}

template <typename Scalar>
Prediction predict(const Model<Scalar>& model, const Tensor<Scalar>& input) {
  return prediction_from_logits(forward(model, input).logits);
}

}  // namespace oralscan

#endif  // ORALSCAN_NETWORK_HPP
