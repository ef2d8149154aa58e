#include "oralscan/inference.hpp"

namespace oralscan {

Classification classify(const Model<float>& model, const Image& img, std::optional<ResolutionTier> tier) {
  Classification out;
  out.received_width = img.width;
  out.received_height = img.height;
  const Image degraded = tier ? degrade_to_tier(img, *tier) : img;
  out.processed_width = degraded.width;
  out.processed_height = degraded.height;
  out.prediction = predict(model, to_input_tensor(degraded, model.config.input_size));
  return out;
}

nlohmann::json to_json(const Prediction& p) {
  return {{"label", label_name(p.label)},
          {"confidence", p.confidence},
          {"distribution", {p.distribution[0], p.distribution[1], p.distribution[2]}}};
}

}  // namespace oralscan
