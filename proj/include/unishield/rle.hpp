#pragma once

#include <string>
#include <string_view>

#include "unishield/types.hpp"

namespace unishield {

// Text transport for masks: "W,H:" then comma-separated run lengths over the
// row-major bits. Runs alternate starting with zeros; only the first run may
// be 0, and the runs sum to W*H.
std::string encode_mask_rle(const Mask& mask);

/// Throws Error{MalformedRle} on grammar failures and Error{RunSumMismatch}
/// when the runs do not cover exactly W*H pixels.
Mask decode_mask_rle(std::string_view text);

}  // namespace unishield
