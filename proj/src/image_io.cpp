#include "unishield/image_io.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first.
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <jpeglib.h>

#include "unishield/encoding.hpp"
#include "unishield/error.hpp"

namespace unishield {

namespace {

constexpr std::uint8_t kPngSignature[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(std::span<const std::uint8_t> b) {
  return b.size() >= 8 && std::memcmp(b.data(), kPngSignature, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

DecodedPixels decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::DecodeError, std::string("PNG decode failed: ") + image.message);
  }
  image.format = PNG_FORMAT_RGBA;
  if (image.width == 0 || image.height == 0 || image.width > 32768 || image.height > 32768) {
    png_image_free(&image);
    throw Error(ErrorCode::DecodeError, "PNG dimensions out of range");
  }
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::DecodeError, "PNG decode failed: " + msg);
  }
  DecodedPixels out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height;
  out.rgb.resize(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    out.rgb[i * 3] = rgba[i * 4];
    out.rgb[i * 3 + 1] = rgba[i * 4 + 1];
    out.rgb[i * 3 + 2] = rgba[i * 4 + 2];
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr) {}

// Keeps non-trivial C++ objects out of the setjmp frame.
bool decode_jpeg_raw(std::span<const std::uint8_t> bytes, JpegErrorManager& err,
                     jpeg_decompress_struct& cinfo, std::uint8_t** buffer, int& w, int& h) {
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.output_message = jpeg_silent;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  w = static_cast<int>(cinfo.output_width);
  h = static_cast<int>(cinfo.output_height);
  if (w < 1 || h < 1 || w > 32768 || h > 32768 || cinfo.output_components != 3) {
    std::strcpy(err.message, "JPEG dimensions out of range");
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  *buffer = static_cast<std::uint8_t*>(std::malloc(static_cast<std::size_t>(w) * h * 3));
  if (*buffer == nullptr) {
    std::strcpy(err.message, "out of memory");
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = *buffer + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

DecodedPixels decode_jpeg(std::span<const std::uint8_t> bytes) {
  JpegErrorManager err{};
  jpeg_decompress_struct cinfo{};
  std::uint8_t* buffer = nullptr;
  int w = 0;
  int h = 0;
  if (!decode_jpeg_raw(bytes, err, cinfo, &buffer, w, h)) {
    std::free(buffer);
    throw Error(ErrorCode::DecodeError, std::string("JPEG decode failed: ") + err.message);
  }
  DecodedPixels out;
  out.width = w;
  out.height = h;
  out.rgb.assign(buffer, buffer + static_cast<std::size_t>(w) * h * 3);
  std::free(buffer);
  return out;
}

bool encode_jpeg_raw(int width, int height, const std::uint8_t* rgb, int quality,
                     JpegErrorManager& err, jpeg_compress_struct& cinfo, unsigned char** out,
                     unsigned long* out_size) {
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.output_message = jpeg_silent;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    return false;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, out, out_size);
  cinfo.image_width = static_cast<JDIMENSION>(width);
  cinfo.image_height = static_cast<JDIMENSION>(height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPROW>(rgb + static_cast<std::size_t>(cinfo.next_scanline) * width * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  return true;
}

}  // namespace

DecodedPixels decode_rgb(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw Error(ErrorCode::DecodeError, "unsupported image container (expected PNG or JPEG)");
}

std::vector<std::uint8_t> encode_png(int width, int height, std::span<const std::uint8_t> rgb) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::InvalidArgument, std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::InvalidArgument, std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> encode_jpeg(int width, int height, std::span<const std::uint8_t> rgb,
                                      int quality) {
  JpegErrorManager err{};
  jpeg_compress_struct cinfo{};
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  if (!encode_jpeg_raw(width, height, rgb.data(), quality, err, cinfo, &buffer, &size)) {
    std::free(buffer);
    throw Error(ErrorCode::InvalidArgument, std::string("JPEG encode failed: ") + err.message);
  }
  std::vector<std::uint8_t> out(buffer, buffer + size);
  std::free(buffer);
  return out;
}

std::vector<std::uint8_t> encode_mask_png(const Mask& mask) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(mask.width());
  image.height = static_cast<png_uint_32>(mask.height());
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> gray(mask.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits()[i] ? 255 : 0;
  png_alloc_size_t size = 0;
  png_image_write_to_memory(&image, nullptr, &size, 0, gray.data(), 0, nullptr);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, gray.data(), 0, nullptr)) {
    throw Error(ErrorCode::InvalidArgument, std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

Mask decode_mask_image(std::span<const std::uint8_t> bytes) {
  auto px = decode_rgb(bytes);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(px.width) * px.height);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const int lum = (px.rgb[i * 3] * 299 + px.rgb[i * 3 + 1] * 587 + px.rgb[i * 3 + 2] * 114) / 1000;
    bits[i] = lum >= 128 ? 1 : 0;
  }
  return Mask(px.width, px.height, std::move(bits));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ImageRecord load_image(const std::filesystem::path& path) {
  return ImageRecord::decode(path.string(), read_file(path));
}

std::string content_id(std::span<const std::uint8_t> bytes) {
  return "fnv:" + hex64(fnv1a64(bytes));
}

}  // namespace unishield
