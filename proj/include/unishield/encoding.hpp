#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace unishield {

std::string base64_encode(std::span<const std::uint8_t> data);

/// Strict RFC 4648 decoding (padding required, no whitespace). Throws
/// Error{InvalidArgument} on bad input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::span<const std::uint8_t> data,
                                std::uint64_t h = kFnvOffset) {
  for (auto b : data) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

// Top 53 bits of a 64-bit hash as a double in [0,1).
constexpr double unit_interval(std::uint64_t h) {
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

std::string hex64(std::uint64_t v);

}  // namespace unishield
