#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "oralscan/dataset.hpp"
#include "oralscan/imaging.hpp"

using namespace oralscan;
namespace fs = std::filesystem;

namespace {

class ManifestTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("oralscan_manifest_" + std::string(
        ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& text) {
    const fs::path p = dir_ / "manifest.jsonl";
    std::ofstream(p) << text;
    return p;
  }

  ManifestError load_error(const std::string& text) {
    try {
      load_manifest(write(text));
    } catch (const ManifestError& e) {
      return e;
    }
    ADD_FAILURE() << "load_manifest did not throw";
    return ManifestError(ManifestError::Kind::Io, 0, "");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(ManifestTest, LoadsValidLines) {
  const auto m = load_manifest(write(
      "{\"path\":\"a.ppm\",\"label\":\"cancerous\",\"hardware\":\"with\"}\n"
      "{\"path\":\"b.ppm\",\"label\":\"non_cancerous\",\"hardware\":null}\n"
      "\n"
      "{\"path\":\"sub/c.png\",\"label\":\"negative\"}\n"));
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.entries[0].hardware, HardwareTag::With);
  EXPECT_FALSE(m.entries[1].hardware.has_value());
  EXPECT_EQ(m.entries[2].label, ClassLabel::Negative);
  EXPECT_EQ(m.root, dir_);
  EXPECT_EQ(m.digest.size(), 16u);
}

TEST_F(ManifestTest, DuplicatePathNamesTheLine) {
  const auto err = load_error(
      "{\"path\":\"a.ppm\",\"label\":\"cancerous\"}\n"
      "{\"path\":\"a.ppm\",\"label\":\"negative\"}\n");
  EXPECT_EQ(err.kind(), ManifestError::Kind::DuplicatePath);
  EXPECT_EQ(err.line(), 2);
  EXPECT_NE(std::string(err.what()).find("line 2"), std::string::npos);
}

TEST_F(ManifestTest, UnknownLabelIsRejected) {
  const auto err = load_error("{\"path\":\"a.ppm\",\"label\":\"benign\"}\n");
  EXPECT_EQ(err.kind(), ManifestError::Kind::UnknownLabel);
  EXPECT_EQ(err.line(), 1);
}

TEST_F(ManifestTest, MalformedLinesReportLineNumbers) {
  const auto err = load_error("{\"path\":\"a.ppm\",\"label\":\"negative\"}\n{not json\n");
  EXPECT_EQ(err.kind(), ManifestError::Kind::Malformed);
  EXPECT_EQ(err.line(), 2);
  EXPECT_EQ(load_error("{\"path\":\"a.ppm\"}\n").kind(), ManifestError::Kind::Malformed);
  EXPECT_EQ(load_error("{\"path\":\"a.ppm\",\"label\":\"negative\",\"hardware\":\"maybe\"}\n").kind(),
            ManifestError::Kind::Malformed);
}

TEST_F(ManifestTest, AbsoluteAndTraversalPathsAreRejected) {
  EXPECT_EQ(load_error("{\"path\":\"/etc/passwd\",\"label\":\"negative\"}\n").kind(), ManifestError::Kind::InvalidPath);
  EXPECT_EQ(load_error("{\"path\":\"../x.ppm\",\"label\":\"negative\"}\n").kind(), ManifestError::Kind::InvalidPath);
  EXPECT_EQ(load_error("{\"path\":\"a/../../x.ppm\",\"label\":\"negative\"}\n").kind(),
            ManifestError::Kind::InvalidPath);
}

TEST_F(ManifestTest, DigestTracksEntryListOnly) {
  const std::string text =
      "{\"path\":\"a.ppm\",\"label\":\"cancerous\"}\n{\"path\":\"b.ppm\",\"label\":\"negative\"}\n";
  const auto first = load_manifest(write(text));
  const auto second = load_manifest(write(text));
  EXPECT_EQ(first.digest, second.digest);

  const auto reordered = load_manifest(
      write("{\"path\":\"b.ppm\",\"label\":\"negative\"}\n{\"path\":\"a.ppm\",\"label\":\"cancerous\"}\n"));
  EXPECT_NE(reordered.digest, first.digest);
  const auto relabelled = load_manifest(
      write("{\"path\":\"a.ppm\",\"label\":\"non_cancerous\"}\n{\"path\":\"b.ppm\",\"label\":\"negative\"}\n"));
  EXPECT_NE(relabelled.digest, first.digest);
}

TEST_F(ManifestTest, SaveThenLoadPreservesEntries) {
  const auto m = make_manifest(dir_, {{"x.ppm", ClassLabel::Cancerous, HardwareTag::Without},
                                      {"y.ppm", ClassLabel::Negative, std::nullopt}});
  save_manifest(m, dir_ / "out.jsonl");
  const auto back = load_manifest(dir_ / "out.jsonl");
  EXPECT_EQ(back.entries, m.entries);
  EXPECT_EQ(back.digest, m.digest);
}

TEST_F(ManifestTest, ValidateCountsClassesAndReportsMissingFiles) {
  Image img(4, 3);
  write_ppm(dir_ / "a.ppm", img);
  write_ppm(dir_ / "b.ppm", img);
  std::ofstream(dir_ / "bad.ppm") << "not an image";
  const auto m = make_manifest(dir_, {{"a.ppm", ClassLabel::Cancerous, HardwareTag::With},
                                      {"b.ppm", ClassLabel::NonCancerous, HardwareTag::Without},
                                      {"missing.ppm", ClassLabel::Negative, std::nullopt},
                                      {"bad.ppm", ClassLabel::Negative, std::nullopt}});
  const std::string digest_before = m.digest;
  const auto report = validate(m);
  ASSERT_EQ(report.problems.size(), 2u);
  EXPECT_NE(report.problems[0].find("missing.ppm"), std::string::npos);
  EXPECT_NE(report.problems[1].find("bad.ppm"), std::string::npos);
  EXPECT_EQ(report.class_counts, (std::array<long, 3>{1, 1, 2}));
  EXPECT_EQ(report.with_hardware, 1);
  EXPECT_EQ(report.without_hardware, 1);
  EXPECT_EQ(report.untagged, 2);
  EXPECT_EQ(m.digest, digest_before);
}

TEST_F(ManifestTest, PaperShapedCorpusCounts) {
  // 3275 oral-cavity images (split across the two oral classes) plus 1018 negatives.
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 3275; ++i) {
    entries.push_back({"oral/" + std::to_string(i) + ".png", i < 1600 ? ClassLabel::Cancerous : ClassLabel::NonCancerous,
                       std::nullopt});
  }
  for (int i = 0; i < 1018; ++i) entries.push_back({"neg/" + std::to_string(i) + ".png", ClassLabel::Negative, std::nullopt});
  const auto report = validate(make_manifest(dir_, std::move(entries)));
  EXPECT_EQ(report.total, 4293);
  EXPECT_EQ(report.class_counts[0] + report.class_counts[1], 3275);
  EXPECT_EQ(report.class_counts[2], 1018);
  EXPECT_EQ(report.problems.size(), 4293u);  // none of the files exist here
}

TEST_F(ManifestTest, SyntheticCorpusValidatesCleanly) {
  const auto m = gen_synthetic(2, 3, dir_ / "corpus");
  const auto report = validate(m);
  EXPECT_TRUE(report.problems.empty());
  EXPECT_EQ(report.class_counts, (std::array<long, 3>{2, 2, 2}));
}
