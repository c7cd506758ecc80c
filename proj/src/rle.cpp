#include "unishield/rle.hpp"

#include <charconv>
#include <limits>

#include "unishield/error.hpp"

namespace unishield {

std::string encode_mask_rle(const Mask& mask) {
  std::string out = std::to_string(mask.width()) + "," + std::to_string(mask.height()) + ":";
  std::uint8_t current = 0;
  std::size_t run = 0;
  bool first = true;
  auto flush = [&] {
    if (!first) out += ',';
    out += std::to_string(run);
    first = false;
  };
  for (auto bit : mask.bits()) {
    if (bit != current) {
      flush();
      current = bit;
      run = 0;
    }
    ++run;
  }
  flush();
  return out;
}

namespace {

// Parses a non-empty run of ASCII digits without sign or leading '+'.
bool parse_uint(std::string_view s, std::uint64_t& value) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void malformed(const std::string& why) {
  throw Error(ErrorCode::MalformedRle, "malformed RLE: " + why);
}

}  // namespace

Mask decode_mask_rle(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) malformed("missing ':'");
  const auto header = text.substr(0, colon);
  const auto comma = header.find(',');
  if (comma == std::string_view::npos) malformed("header must be W,H");
  std::uint64_t w = 0;
  std::uint64_t h = 0;
  if (!parse_uint(header.substr(0, comma), w) || !parse_uint(header.substr(comma + 1), h)) {
    malformed("bad dimensions");
  }
  constexpr std::uint64_t kMaxSide = std::numeric_limits<int>::max();
  if (w < 1 || h < 1 || w > kMaxSide || h > kMaxSide) malformed("dimensions out of range");
  const std::uint64_t total = w * h;
  if (total / w != h || total > (std::uint64_t{1} << 32)) malformed("mask too large");

  std::vector<std::uint8_t> bits;
  bits.reserve(static_cast<std::size_t>(total));
  std::uint64_t sum = 0;
  std::uint8_t value = 0;
  bool first = true;
  auto body = text.substr(colon + 1);
  while (true) {
    const auto next = body.find(',');
    const auto token = body.substr(0, next);
    std::uint64_t run = 0;
    if (!parse_uint(token, run)) malformed("bad run length");
    if (!first && run == 0) malformed("only the first run may be empty");
    sum += run;
    if (sum > total) {
      throw Error(ErrorCode::RunSumMismatch, "RLE runs exceed W*H");
    }
    bits.insert(bits.end(), static_cast<std::size_t>(run), value);
    value ^= 1;
    first = false;
    if (next == std::string_view::npos) break;
    body = body.substr(next + 1);
  }
  if (sum != total) throw Error(ErrorCode::RunSumMismatch, "RLE runs do not sum to W*H");
  return Mask(static_cast<int>(w), static_cast<int>(h), std::move(bits));
}

}  // namespace unishield
