#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "oralscan/checkpoint.hpp"

using namespace oralscan;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.input_size = 16;
  c.conv_stages = {{4, 3}, {6, 5}};
  c.hidden_units = 8;
  c.seed = 99;
  return c;
}

TrainingMetadata sample_meta() { return {1234, 7, "00112233aabbccdd"}; }

CheckpointError::Kind error_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "deserialize_checkpoint accepted corrupt bytes";
  return CheckpointError::Kind::Io;
}

std::uint64_t header_length(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t n = 0;
  for (int i = 7; i >= 0; --i) n = (n << 8) | bytes[8 + static_cast<std::size_t>(i)];
  return n;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto model = build<float>(small_config());
  const auto back = deserialize_checkpoint(serialize_checkpoint(model, sample_meta()));
  EXPECT_EQ(back.model.config, model.config);
  EXPECT_EQ(back.metadata, sample_meta());
  EXPECT_EQ(back.model.checksum(), model.checksum());
  const auto a = model.parameters();
  const auto b = back.model.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i]->shape(), b[i]->shape());
    EXPECT_EQ(std::memcmp(a[i]->data(), b[i]->data(), static_cast<std::size_t>(a[i]->size()) * sizeof(float)), 0);
  }
}

TEST(Checkpoint, SpecialFloatValuesSurvive) {
  auto model = build<float>(small_config());
  model.output.bias[0] = -0.0f;
  model.output.bias[1] = std::numeric_limits<float>::denorm_min();
  model.output.bias[2] = std::numeric_limits<float>::max();
  const auto back = deserialize_checkpoint(serialize_checkpoint(model, {}));
  EXPECT_TRUE(std::signbit(back.model.output.bias[0]));
  EXPECT_EQ(back.model.output.bias[1], std::numeric_limits<float>::denorm_min());
  EXPECT_EQ(back.model.output.bias[2], std::numeric_limits<float>::max());
}

TEST(Checkpoint, LayoutFollowsTheDocumentedFormat) {
  const auto model = build<float>(small_config());
  const auto bytes = serialize_checkpoint(model, sample_meta());
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "OCSN");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
  const auto hlen = header_length(bytes);
  const auto header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  EXPECT_EQ(header["config"]["input_size"], 16);
  EXPECT_EQ(header["metadata"]["epochs_completed"], 7);
  EXPECT_EQ(header["tensors"].size(), model.parameters().size());
  EXPECT_EQ(bytes.size() - 16 - hlen, static_cast<std::size_t>(parameter_count(model.config)) * 4);
}

TEST(Checkpoint, SerializationIsDeterministic) {
  const auto model = build<float>(small_config());
  EXPECT_EQ(serialize_checkpoint(model, sample_meta()), serialize_checkpoint(model, sample_meta()));
  EXPECT_EQ(serialize_checkpoint(model, sample_meta()),
            serialize_checkpoint(build<float>(small_config()), sample_meta()));
}

TEST(Checkpoint, TruncatedByOneByte) {
  auto bytes = serialize_checkpoint(build<float>(small_config()), sample_meta());
  bytes.pop_back();
  EXPECT_EQ(error_kind(bytes), CheckpointError::Kind::Truncated);
}

TEST(Checkpoint, TruncatedInsideHeaderOrPreamble) {
  const auto bytes = serialize_checkpoint(build<float>(small_config()), sample_meta());
  EXPECT_EQ(error_kind({bytes.begin(), bytes.begin() + 40}), CheckpointError::Kind::Truncated);
  EXPECT_EQ(error_kind({bytes.begin(), bytes.begin() + 10}), CheckpointError::Kind::Truncated);
  EXPECT_EQ(error_kind({bytes.begin(), bytes.begin() + 2}), CheckpointError::Kind::Truncated);
  EXPECT_EQ(error_kind({}), CheckpointError::Kind::Truncated);
}

TEST(Checkpoint, CorruptMagic) {
  auto bytes = serialize_checkpoint(build<float>(small_config()), sample_meta());
  bytes[0] = 'X';
  EXPECT_EQ(error_kind(bytes), CheckpointError::Kind::BadMagic);
}

TEST(Checkpoint, VersionMismatch) {
  auto bytes = serialize_checkpoint(build<float>(small_config()), sample_meta());
  bytes[4] = 2;
  EXPECT_EQ(error_kind(bytes), CheckpointError::Kind::VersionMismatch);
}

TEST(Checkpoint, ShapeListDisagreeingWithConfig) {
  const auto bytes = serialize_checkpoint(build<float>(small_config()), sample_meta());
  const auto hlen = header_length(bytes);
  auto header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  header["tensors"][0]["shape"][0] = 5;
  const std::string text = header.dump();

  std::vector<std::uint8_t> edited(bytes.begin(), bytes.begin() + 8);
  for (int i = 0; i < 8; ++i) edited.push_back(static_cast<std::uint8_t>(text.size() >> (8 * i)));
  edited.insert(edited.end(), text.begin(), text.end());
  edited.insert(edited.end(), bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen), bytes.end());
  EXPECT_EQ(error_kind(edited), CheckpointError::Kind::Inconsistent);
}

TEST(Checkpoint, TrailingBytesAndGarbageHeaderAreInconsistent) {
  auto bytes = serialize_checkpoint(build<float>(small_config()), sample_meta());
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_EQ(error_kind(longer), CheckpointError::Kind::Inconsistent);
  bytes[16] = '#';
  EXPECT_EQ(error_kind(bytes), CheckpointError::Kind::Inconsistent);
}

TEST(Checkpoint, FileRoundTripAndDigest) {
  const fs::path path = fs::temp_directory_path() / "oralscan_ckpt_roundtrip.ocsn";
  const auto model = build<float>(small_config());
  const std::string digest = save_checkpoint(model, sample_meta(), path);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back.digest, digest);
  EXPECT_EQ(digest.size(), 16u);
  EXPECT_EQ(back.model.checksum(), model.checksum());
  fs::remove(path);
}

TEST(Checkpoint, MissingFileIsAnIoError) {
  try {
    load_checkpoint("/nonexistent/dir/model.ocsn");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::Io);
  }
}
