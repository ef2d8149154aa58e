#ifndef ORALSCAN_DATASET_HPP
#define ORALSCAN_DATASET_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "oralscan/network.hpp"

namespace oralscan {

/// Whether a capture used the phone-mounted mouthpiece.
enum class HardwareTag { With, Without };

std::string_view hardware_name(HardwareTag tag);

struct ManifestEntry {
  std::string path;  // relative to the manifest root
  ClassLabel label = ClassLabel::Cancerous;
  std::optional<HardwareTag> hardware;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;
  std::string digest;

  std::filesystem::path resolve(const ManifestEntry& e) const { return root / e.path; }
  std::size_t size() const { return entries.size(); }
};

class ManifestError : public std::runtime_error {
 public:
  enum class Kind { Io, Malformed, DuplicatePath, UnknownLabel, InvalidPath };
  ManifestError(Kind kind, long line, const std::string& what)
      : std::runtime_error(line > 0 ? "manifest line " + std::to_string(line) + ": " + what : what),
        kind_(kind),
        line_(line) {}
  Kind kind() const { return kind_; }
  long line() const { return line_; }

 private:
  Kind kind_;
  long line_;
};

/// Hex FNV-1a digest over the ordered (path, label, hardware) list.
std::string manifest_digest(const std::vector<ManifestEntry>& entries);

/// Builds a manifest in memory, checking paths and uniqueness. Throws ManifestError.
DatasetManifest make_manifest(std::filesystem::path root, std::vector<ManifestEntry> entries);

/// One JSON object per line: {"path":..., "label":..., "hardware":"with"|"without"|null}.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct ValidationReport {
  std::vector<std::string> problems;
  std::array<long, kNumClasses> class_counts{};
  long with_hardware = 0;
  long without_hardware = 0;
  long untagged = 0;
  long total = 0;
};

/// Checks that every file exists and decodes; never throws for per-entry problems.
ValidationReport validate(const DatasetManifest& manifest);

}  // namespace oralscan

#endif  // ORALSCAN_DATASET_HPP
