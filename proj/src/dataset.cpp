#include "oralscan/dataset.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "oralscan/digest.hpp"
#include "oralscan/imaging.hpp"

namespace oralscan {

using nlohmann::json;

std::string_view hardware_name(HardwareTag tag) { return tag == HardwareTag::With ? "with" : "without"; }

std::string manifest_digest(const std::vector<ManifestEntry>& entries) {
  std::uint64_t h = kFnvOffset;
  for (const ManifestEntry& e : entries) {
    std::string record = e.path;
    record += '\x1f';
    record += std::to_string(label_index(e.label));
    record += '\x1f';
    record += e.hardware ? std::string(hardware_name(*e.hardware)) : std::string("-");
    record += '\n';
    h = fnv1a64(record, h);
  }
  return hex_digest(h);
}

namespace {

bool is_safe_relative(const std::string& p) {
  if (p.empty()) return false;
  const std::filesystem::path path(p);
  if (path.is_absolute() || path.has_root_name() || path.has_root_directory()) return false;
  for (const auto& part : path) {
    if (part == "..") return false;
  }
  return true;
}

void check_entry(const ManifestEntry& e, std::set<std::string>& seen, long line) {
  if (!is_safe_relative(e.path)) {
    throw ManifestError(ManifestError::Kind::InvalidPath, line,
                        "path '" + e.path + "' must be root-relative without parent traversal");
  }
  if (!seen.insert(e.path).second) {
    throw ManifestError(ManifestError::Kind::DuplicatePath, line, "duplicate path '" + e.path + "'");
  }
}

ManifestEntry parse_line(const std::string& text, long line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ManifestError(ManifestError::Kind::Malformed, line, std::string("invalid JSON: ") + err.what());
  }
  if (!j.is_object() || !j.contains("path") || !j["path"].is_string() || !j.contains("label") ||
      !j["label"].is_string()) {
    throw ManifestError(ManifestError::Kind::Malformed, line, "expected object with string 'path' and 'label'");
  }
  ManifestEntry e;
  e.path = j["path"].get<std::string>();
  const auto label_text = j["label"].get<std::string>();
  const auto label = parse_label(label_text);
  if (!label) throw ManifestError(ManifestError::Kind::UnknownLabel, line, "unknown label '" + label_text + "'");
  e.label = *label;
  if (j.contains("hardware") && !j["hardware"].is_null()) {
    const auto& hw = j["hardware"];
    if (hw == "with") {
      e.hardware = HardwareTag::With;
    } else if (hw == "without") {
      e.hardware = HardwareTag::Without;
    } else {
      throw ManifestError(ManifestError::Kind::Malformed, line, "hardware must be \"with\", \"without\" or null");
    }
  }
  return e;
}

}  // namespace

DatasetManifest make_manifest(std::filesystem::path root, std::vector<ManifestEntry> entries) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) check_entry(entries[i], seen, static_cast<long>(i + 1));
  DatasetManifest m;
  m.root = std::move(root);
  m.entries = std::move(entries);
  m.digest = manifest_digest(m.entries);
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError(ManifestError::Kind::Io, 0, "cannot open manifest " + path.string());
  DatasetManifest m;
  m.root = path.parent_path();
  std::set<std::string> seen;
  std::string text;
  long line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestEntry e = parse_line(text, line);
    check_entry(e, seen, line);
    m.entries.push_back(std::move(e));
  }
  m.digest = manifest_digest(m.entries);
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ManifestError(ManifestError::Kind::Io, 0, "cannot write manifest " + path.string());
  for (const ManifestEntry& e : manifest.entries) {
    json j;
    j["path"] = e.path;
    j["label"] = std::string(label_name(e.label));
    j["hardware"] = e.hardware ? json(std::string(hardware_name(*e.hardware))) : json(nullptr);
    out << j.dump() << '\n';
  }
  if (!out) throw ManifestError(ManifestError::Kind::Io, 0, "failed writing manifest " + path.string());
}

ValidationReport validate(const DatasetManifest& manifest) {
  ValidationReport r;
  for (const ManifestEntry& e : manifest.entries) {
    ++r.total;
    ++r.class_counts[static_cast<std::size_t>(label_index(e.label))];
    if (!e.hardware) {
      ++r.untagged;
    } else if (*e.hardware == HardwareTag::With) {
      ++r.with_hardware;
    } else {
      ++r.without_hardware;
    }
    const auto file = manifest.resolve(e);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(file, ec)) {
      r.problems.push_back(e.path + ": file not found");
      continue;
    }
    try {
      read_image(file);
    } catch (const ImageError& err) {
      r.problems.push_back(e.path + ": " + err.what());
    }
  }
  return r;
}

}  // namespace oralscan
