#ifndef ORALSCAN_DIGEST_HPP
#define ORALSCAN_DIGEST_HPP

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

namespace oralscan {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;

/// 64-bit FNV-1a, chainable through the seed.
inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = kFnvOffset) {
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), seed);
}

inline std::string hex_digest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace oralscan

#endif  // ORALSCAN_DIGEST_HPP
