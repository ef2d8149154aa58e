#ifndef ORALSCAN_INFERENCE_HPP
#define ORALSCAN_INFERENCE_HPP

#include <optional>

#include "json.hpp"
#include "oralscan/imaging.hpp"
#include "oralscan/network.hpp"

namespace oralscan {

struct Classification {
  Prediction prediction;
  int received_width = 0;
  int received_height = 0;
  int processed_width = 0;   // after optional tier degradation
  int processed_height = 0;
};

/// decode result -> optional degrade_to_tier -> to_input_tensor -> predict.
/// Shared by the CLI and the HTTP service so both paths agree exactly.
Classification classify(const Model<float>& model, const Image& img, std::optional<ResolutionTier> tier);

/// {"label", "confidence", "distribution"}
nlohmann::json to_json(const Prediction& p);

}  // namespace oralscan

#endif  // ORALSCAN_INFERENCE_HPP
