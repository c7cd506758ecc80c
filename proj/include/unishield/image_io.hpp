#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "unishield/types.hpp"

namespace unishield {

struct DecodedPixels {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // width*height*3
};

/// PNG or baseline JPEG to 8-bit RGB. Alpha is dropped, grayscale broadcast.
/// Throws Error{DecodeError}.
DecodedPixels decode_rgb(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(int width, int height, std::span<const std::uint8_t> rgb);
std::vector<std::uint8_t> encode_jpeg(int width, int height, std::span<const std::uint8_t> rgb,
                                      int quality = 90);

// Grayscale PNG, tampered = 255.
std::vector<std::uint8_t> encode_mask_png(const Mask& mask);
/// Any decodable image; a pixel is tampered when its luminance is >= 128.
Mask decode_mask_image(std::span<const std::uint8_t> bytes);

/// Throws Error{IoError}.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file(const std::filesystem::path& path, std::string_view text);

/// Reads and decodes; id is the path as given.
ImageRecord load_image(const std::filesystem::path& path);

/// Default identity for images without a natural name: "fnv:<hex of bytes>".
std::string content_id(std::span<const std::uint8_t> bytes);

}  // namespace unishield
