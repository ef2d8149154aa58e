#ifndef ORALSCAN_CHECKPOINT_HPP
#define ORALSCAN_CHECKPOINT_HPP

// Binary checkpoint layout (all integers little-endian):
//   "OCSN" | u32 version (= 1) | u64 header length | UTF-8 JSON header | f32 payload
// The header carries the model config, training metadata and the ordered list
// of tensor shapes; the payload holds the tensors back to back in that order.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "oralscan/network.hpp"

namespace oralscan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, VersionMismatch, Truncated, Inconsistent };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  int epochs_completed = 0;
  std::string dataset_digest;

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

struct Checkpoint {
  Model<float> model;
  TrainingMetadata metadata;
  std::string digest;  // digest of the serialized bytes
};

std::vector<std::uint8_t> serialize_checkpoint(const Model<float>& model, const TrainingMetadata& meta);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

/// Returns the digest of the written bytes.
std::string save_checkpoint(const Model<float>& model, const TrainingMetadata& meta, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace oralscan

#endif  // ORALSCAN_CHECKPOINT_HPP
