#include "oralscan/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <random>

namespace oralscan {

Image::Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {
  if (w < 1 || h < 1) throw std::invalid_argument("image dimensions must be positive");
}

namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
constexpr long kMaxSide = 1 << 15;

[[noreturn]] void corrupt(const std::string& what) { throw ImageError(ImageError::Kind::CorruptStream, what); }

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

/// Reads one unsigned header token, skipping whitespace and '#' comments.
long read_header_int(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (is_space(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') ++pos;
  if (pos == start || pos - start > 9) corrupt("malformed PPM header");
  long value = 0;
  std::from_chars(reinterpret_cast<const char*>(bytes.data() + start), reinterpret_cast<const char*>(bytes.data() + pos),
                  value);
  return value;
}

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 2;
  const long width = read_header_int(bytes, pos);
  const long height = read_header_int(bytes, pos);
  const long maxval = read_header_int(bytes, pos);
  if (width < 1 || height < 1 || width > kMaxSide || height > kMaxSide) corrupt("PPM dimensions out of range");
  if (maxval < 1 || maxval > 65535) corrupt("PPM maxval out of range");
  if (maxval != 255) {
    throw ImageError(ImageError::Kind::UnsupportedBitDepth,
                     "PPM maxval " + std::to_string(maxval) + " unsupported (only 255)");
  }
  if (pos >= bytes.size() || !is_space(bytes[pos])) corrupt("PPM header not terminated by whitespace");
  ++pos;
  Image img(static_cast<int>(width), static_cast<int>(height));
  if (bytes.size() - pos < img.pixels.size()) {
    corrupt("PPM payload truncated: expected " + std::to_string(img.pixels.size()) + " bytes, found " +
            std::to_string(bytes.size() - pos));
  }
  std::memcpy(img.pixels.data(), bytes.data() + pos, img.pixels.size());
  return img;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    const std::string msg = image.message;
    png_image_free(&image);
    corrupt("PNG header: " + msg);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw ImageError(ImageError::Kind::UnsupportedBitDepth, "16-bit PNG unsupported (only 8-bit)");
  }
  if (image.width > kMaxSide || image.height > kMaxSide) {
    png_image_free(&image);
    corrupt("PNG dimensions out of range");
  }
  // Read as RGBA so that any alpha channel is carried through untouched and then dropped,
  // rather than being composited against a background.
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    corrupt("PNG data: " + msg);
  }
  Image img(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0, n = img.pixel_count(); i < n; ++i) {
    std::copy_n(rgba.begin() + static_cast<std::ptrdiff_t>(4 * i), 3, img.pixels.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return img;
}

}  // namespace

Image decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  if (bytes.size() >= 8 && std::equal(std::begin(kPngSignature), std::end(kPngSignature), bytes.begin())) {
    return decode_png(bytes);
  }
  throw ImageError(ImageError::Kind::UnknownFormat, "unrecognised image format (expected P6 PPM or PNG)");
}

Image read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError(ImageError::Kind::Io, "cannot open image " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError(ImageError::Kind::Io, "cannot write " + path.string());
}

namespace {

struct Tap {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
};

/// Source sample positions for each destination coordinate along one axis.
std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (int i = 0; i < dst; ++i) {
    const double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
    Tap& t = taps[static_cast<std::size_t>(i)];
    t.lo = static_cast<int>(std::floor(s));
    t.hi = std::min(t.lo + 1, src - 1);
    t.frac = s - t.lo;
  }
  return taps;
}

}  // namespace

Image resample_bilinear(const Image& img, int width, int height) {
  if (width < 1 || height < 1) throw std::invalid_argument("resample target dimensions must be >= 1");
  if (width == img.width && height == img.height) return img;
  const auto xs = bilinear_taps(img.width, width);
  const auto ys = bilinear_taps(img.height, height);
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    const Tap& ty = ys[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      const Tap& tx = xs[static_cast<std::size_t>(x)];
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - tx.frac) * img.at(tx.lo, ty.lo, c) + tx.frac * img.at(tx.hi, ty.lo, c);
        const double bottom = (1.0 - tx.frac) * img.at(tx.lo, ty.hi, c) + tx.frac * img.at(tx.hi, ty.hi, c);
        const double v = (1.0 - ty.frac) * top + ty.frac * bottom;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

int tier_height(ResolutionTier tier) {
  switch (tier) {
    case ResolutionTier::R144: return 144;
    case ResolutionTier::R360: return 360;
    case ResolutionTier::R720: return 720;
    case ResolutionTier::R1080: return 1080;
    case ResolutionTier::R1440: return 1440;
  }
  return 0;
}

int tier_width(ResolutionTier tier) { return tier_height(tier) * 16 / 9; }

long tier_pixel_count(ResolutionTier tier) { return static_cast<long>(tier_width(tier)) * tier_height(tier); }

std::string tier_name(ResolutionTier tier) { return std::to_string(tier_height(tier)) + "p"; }

std::optional<ResolutionTier> parse_tier(std::string_view text) {
  if (!text.empty() && (text.front() == 'R' || text.front() == 'r')) text.remove_prefix(1);
  if (!text.empty() && (text.back() == 'p' || text.back() == 'P')) text.remove_suffix(1);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  for (ResolutionTier t : kAllTiers) {
    if (tier_height(t) == value) return t;
  }
  return std::nullopt;
}

Image degrade_to_tier(const Image& img, ResolutionTier tier) {
  const long th = tier_height(tier);
  if (img.height <= th) return img;
  // round(width * th / height), half away from zero
  const long w = (2L * img.width * th + img.height) / (2L * img.height);
  return resample_bilinear(img, static_cast<int>(std::max(1L, w)), static_cast<int>(th));
}

Tensor<float> to_input_tensor(const Image& img, Index side) {
  const Image sized = resample_bilinear(img, static_cast<int>(side), static_cast<int>(side));
  Tensor<float> t({3, side, side});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < sized.height; ++y) {
      for (int x = 0; x < sized.width; ++x) t(c, y, x) = static_cast<float>(sized.at(x, y, c)) / 255.0f;
    }
  }
  return t;
}

namespace {

using Rgb = std::array<std::uint8_t, 3>;

Rgb random_color(std::mt19937_64& rng, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return {static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng))};
}

void put(Image& img, int x, int y, const Rgb& color) {
  std::copy(color.begin(), color.end(), img.pixels.begin() + (static_cast<std::ptrdiff_t>(y) * img.width + x) * 3);
}

}  // namespace

Image render_synthetic(ClassLabel label, std::uint64_t seed, int index, int width, int height) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(label_index(label)), static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  Image img(width, height);
  switch (label) {
    case ClassLabel::Cancerous: {
      // Fine checkerboard: full period of 2-4 px, jittered phase and palette.
      const int period = std::uniform_int_distribution<int>(2, 4)(rng);
      const int ox = std::uniform_int_distribution<int>(0, period - 1)(rng);
      const int oy = std::uniform_int_distribution<int>(0, period - 1)(rng);
      const Rgb dark = random_color(rng, 20, 100);
      const Rgb light = random_color(rng, 155, 235);
      for (int y = 0; y < height; ++y) {
        const int cy = 2 * (y + oy) / period;
        for (int x = 0; x < width; ++x) put(img, x, y, ((2 * (x + ox) / period + cy) % 2) ? light : dark);
      }
      break;
    }
    case ClassLabel::NonCancerous: {
      // Coarse diagonal stripes: period 64-128 px along either diagonal.
      const int period = std::uniform_int_distribution<int>(64, 128)(rng);
      const int phase = std::uniform_int_distribution<int>(0, period - 1)(rng);
      const bool rising = std::bernoulli_distribution(0.5)(rng);
      const Rgb dark = random_color(rng, 20, 100);
      const Rgb light = random_color(rng, 155, 235);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const int t = (rising ? x + y : x - y + height) + phase;
          put(img, x, y, (t % period) < period / 2 ? dark : light);
        }
      }
      break;
    }
    case ClassLabel::Negative: {
      std::uniform_int_distribution<int> d(0, 255);
      for (auto& v : img.pixels) v = static_cast<std::uint8_t>(d(rng));
      break;
    }
  }
  return img;
}

DatasetManifest gen_synthetic(int n_per_class, std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw ImageError(ImageError::Kind::Io, "cannot create output directory " + out_dir.string());
  }
  std::vector<ManifestEntry> entries;
  for (ClassLabel label : kAllLabels) {
    for (int i = 0; i < n_per_class; ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_%04d.ppm", std::string(label_name(label)).c_str(), i);
      write_ppm(out_dir / name, render_synthetic(label, seed, i));
      entries.push_back({name, label, std::nullopt});
    }
  }
  DatasetManifest manifest = make_manifest(out_dir, std::move(entries));
  save_manifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

}  // namespace oralscan
