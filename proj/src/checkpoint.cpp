#include "oralscan/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "oralscan/digest.hpp"

namespace oralscan {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'O', 'C', 'S', 'N'};
constexpr std::size_t kPreambleSize = 4 + 4 + 8;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
  return value;
}

std::vector<std::string> tensor_names(const ModelConfig& config) {
  std::vector<std::string> names;
  for (std::size_t s = 0; s < config.conv_stages.size(); ++s) {
    names.push_back("conv" + std::to_string(s) + ".weights");
    names.push_back("conv" + std::to_string(s) + ".bias");
  }
  for (const char* layer : {"hidden", "output"}) {
    names.push_back(std::string(layer) + ".weights");
    names.push_back(std::string(layer) + ".bias");
  }
  return names;
}

json config_to_json(const ModelConfig& c) {
  json stages = json::array();
  for (const ConvStage& s : c.conv_stages) stages.push_back({{"filters", s.filters}, {"kernel_size", s.kernel_size}});
  return {{"input_size", c.input_size},
          {"conv_stages", stages},
          {"hidden_units", c.hidden_units},
          {"num_classes", c.num_classes},
          {"seed", c.seed}};
}

[[noreturn]] void inconsistent(const std::string& what) {
  throw CheckpointError(CheckpointError::Kind::Inconsistent, "checkpoint inconsistent: " + what);
}

[[noreturn]] void truncated(const std::string& what) {
  throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated: " + what);
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_size = j.at("input_size").get<Index>();
  c.conv_stages.clear();
  for (const json& s : j.at("conv_stages")) {
    c.conv_stages.push_back({s.at("filters").get<Index>(), s.at("kernel_size").get<Index>()});
  }
  c.hidden_units = j.at("hidden_units").get<Index>();
  c.num_classes = j.at("num_classes").get<Index>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model<float>& model, const TrainingMetadata& meta) {
  const auto names = tensor_names(model.config);
  const auto params = model.parameters();
  json tensors = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) tensors.push_back({{"name", names[i]}, {"shape", params[i]->shape()}});
  const json header = {
      {"config", config_to_json(model.config)},
      {"metadata",
       {{"seed", meta.seed}, {"epochs_completed", meta.epochs_completed}, {"dataset_digest", meta.dataset_digest}}},
      {"tensors", tensors}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const Tensor<float>* p : params) {
    for (Index i = 0; i < p->size(); ++i) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>((*p)[i]));
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic) truncated("file shorter than magic");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw CheckpointError(CheckpointError::Kind::BadMagic, "bad magic: not an OCSN checkpoint");
  }
  if (bytes.size() < kPreambleSize) truncated("incomplete preamble");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                          "checkpoint version " + std::to_string(version) + " unsupported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get_le<std::uint64_t>(bytes.data() + 8);
  if (header_len > bytes.size() - kPreambleSize) truncated("header extends past end of file");

  json header;
  try {
    header = json::parse(bytes.begin() + kPreambleSize, bytes.begin() + static_cast<std::ptrdiff_t>(kPreambleSize + header_len));
  } catch (const json::exception& e) {
    inconsistent(std::string("unreadable header: ") + e.what());
  }

  Checkpoint ckpt;
  std::vector<Shape> shapes;
  try {
    ckpt.model = build_zeroed<float>(config_from_json(header.at("config")));
    const json& meta = header.at("metadata");
    ckpt.metadata.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.metadata.epochs_completed = meta.at("epochs_completed").get<int>();
    ckpt.metadata.dataset_digest = meta.at("dataset_digest").get<std::string>();
    for (const json& t : header.at("tensors")) shapes.push_back(t.at("shape").get<Shape>());
  } catch (const json::exception& e) {
    inconsistent(std::string("header fields: ") + e.what());
  } catch (const ConfigError& e) {
    inconsistent(std::string("model config: ") + e.what());
  }

  auto params = ckpt.model.parameters();
  if (shapes.size() != params.size()) inconsistent("tensor count does not match config");
  std::size_t needed = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (shapes[i] != params[i]->shape()) {
      inconsistent("tensor " + std::to_string(i) + " has shape " + shape_string(shapes[i]) + ", config implies " +
                   shape_string(params[i]->shape()));
    }
    needed += static_cast<std::size_t>(params[i]->size()) * 4;
  }
  const std::size_t payload = bytes.size() - kPreambleSize - header_len;
  if (payload < needed) truncated("payload has " + std::to_string(payload) + " bytes, need " + std::to_string(needed));
  if (payload > needed) inconsistent(std::to_string(payload - needed) + " trailing bytes after payload");

  const std::uint8_t* p = bytes.data() + kPreambleSize + header_len;
  for (Tensor<float>* t : params) {
    for (Index i = 0; i < t->size(); ++i, p += 4) (*t)[i] = std::bit_cast<float>(get_le<std::uint32_t>(p));
  }
  ckpt.digest = hex_digest(fnv1a64(bytes));
  return ckpt;
}

std::string save_checkpoint(const Model<float>& model, const TrainingMetadata& meta, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write checkpoint " + path.string());
  return hex_digest(fnv1a64(bytes));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace oralscan
