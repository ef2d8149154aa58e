#ifndef ORALSCAN_IMAGING_HPP
#define ORALSCAN_IMAGING_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "oralscan/dataset.hpp"
#include "oralscan/tensor.hpp"

namespace oralscan {

/// 8-bit RGB raster, row-major, channels interleaved.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h);

  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  long pixel_count() const { return static_cast<long>(width) * height; }

  friend bool operator==(const Image&, const Image&) = default;
};

class ImageError : public std::runtime_error {
 public:
  enum class Kind { UnknownFormat, CorruptStream, UnsupportedBitDepth, Io };
  ImageError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Decodes binary PPM (P6, maxval 255) or PNG (8-bit; alpha is discarded).
Image decode(std::span<const std::uint8_t> bytes);
Image read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_ppm(const Image& img);
void write_ppm(const std::filesystem::path& path, const Image& img);

/// Bilinear interpolation with half-pixel centre alignment; rounds to nearest and clamps to 0..255.
Image resample_bilinear(const Image& img, int width, int height);

enum class ResolutionTier { R144, R360, R720, R1080, R1440 };

inline constexpr std::array<ResolutionTier, 5> kAllTiers = {ResolutionTier::R144, ResolutionTier::R360,
                                                            ResolutionTier::R720, ResolutionTier::R1080,
                                                            ResolutionTier::R1440};

int tier_height(ResolutionTier tier);
/// Canonical 16:9 width for the tier (256, 640, 1280, 1920, 2560).
int tier_width(ResolutionTier tier);
long tier_pixel_count(ResolutionTier tier);
std::string tier_name(ResolutionTier tier);
/// Accepts "144", "144p" or "R144".
std::optional<ResolutionTier> parse_tier(std::string_view text);

/// Downscales to the tier height keeping aspect ratio; never upsamples.
Image degrade_to_tier(const Image& img, ResolutionTier tier);

/// Resizes to side x side and scales channels to [0, 1]; layout [3, side, side].
Tensor<float> to_input_tensor(const Image& img, Index side);

inline constexpr int kSyntheticWidth = 1920;
inline constexpr int kSyntheticHeight = 1080;

/// Renders one synthetic sample: class 0 fine checkerboard, class 1 coarse
/// diagonal stripes, class 2 uniform noise. Deterministic in (seed, label, index).
Image render_synthetic(ClassLabel label, std::uint64_t seed, int index, int width = kSyntheticWidth,
                       int height = kSyntheticHeight);

/// Writes 3 * n_per_class PPM images plus manifest.jsonl into out_dir.
DatasetManifest gen_synthetic(int n_per_class, std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace oralscan

#endif  // ORALSCAN_IMAGING_HPP
