#pragma once

// 8-bit sRGB PNG through libpng's simplified API. Channel values map
// linearly between [0, 1] and [0, 255].

#include <png.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "focuskit/core/image.hpp"
#include "focuskit/io/atomic_file.hpp"

namespace focuskit::io {

inline std::uint8_t quantize_unit(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

inline std::string encode_png(const RgbImage& image) {
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(image.width()) * image.height() * 3);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize_unit(image.pixels().data()[i]);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, raw.data(), 0, nullptr))
    throw std::runtime_error(std::string("png encode failed: ") + png.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, raw.data(), 0, nullptr))
    throw std::runtime_error(std::string("png encode failed: ") + png.message);
  out.resize(size);
  return out;
}

inline RgbImage decode_png(const std::string& bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
    throw std::runtime_error(std::string("png decode failed: ") + png.message);
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raw.data(), 0, nullptr)) {
    png_image_free(&png);
    throw std::runtime_error(std::string("png decode failed: ") + png.message);
  }
  RgbImage image(static_cast<int>(png.width), static_cast<int>(png.height));
  for (std::size_t i = 0; i < raw.size(); ++i) image.pixels().data()[i] = raw[i] / 255.0f;
  return image;
}

inline void write_png(const std::filesystem::path& path, const RgbImage& image) {
  write_file_atomic(path, encode_png(image));
}

inline RgbImage read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

}  // namespace focuskit::io
