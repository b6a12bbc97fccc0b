#pragma once

// Portable float map: "Pf" (1 channel) or "PF" (3 channels), little-endian
// (scale -1.0), rows stored bottom-to-top.

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>

#include "focuskit/core/image.hpp"
#include "focuskit/io/atomic_file.hpp"

namespace focuskit::io {

static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");

inline std::string encode_pfm(const Grid<float>& grid) {
  if (grid.channels() != 1 && grid.channels() != 3) throw std::invalid_argument("pfm: 1 or 3 channels only");
  std::string out = (grid.channels() == 1 ? "Pf\n" : "PF\n") + std::to_string(grid.width()) + " " +
                    std::to_string(grid.height()) + "\n-1.0\n";
  const std::size_t row_floats = static_cast<std::size_t>(grid.width()) * grid.channels();
  for (int y = grid.height() - 1; y >= 0; --y) {
    const float* row = grid.data().data() + static_cast<std::size_t>(y) * row_floats;
    out.append(reinterpret_cast<const char*>(row), row_floats * sizeof(float));
  }
  return out;
}

inline Grid<float> decode_pfm(const std::string& bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  const std::string magic = token();
  int channels = 0;
  if (magic == "Pf") channels = 1;
  else if (magic == "PF") channels = 3;
  else throw std::runtime_error("pfm: bad magic");
  const int w = std::stoi(token());
  const int h = std::stoi(token());
  const double scale = std::stod(token());
  ++pos;  // single whitespace after the scale
  if (scale > 0.0) throw std::runtime_error("pfm: big-endian files are not supported");
  if (w < 1 || h < 1) throw std::runtime_error("pfm: bad dimensions");
  Grid<float> grid(w, h, channels);
  const std::size_t row_floats = static_cast<std::size_t>(w) * channels;
  if (bytes.size() - pos < row_floats * h * sizeof(float)) throw std::runtime_error("pfm: truncated data");
  for (int y = h - 1; y >= 0; --y) {
    std::memcpy(grid.data().data() + static_cast<std::size_t>(y) * row_floats, bytes.data() + pos,
                row_floats * sizeof(float));
    pos += row_floats * sizeof(float);
  }
  return grid;
}

inline void write_pfm(const std::filesystem::path& path, const Grid<float>& grid) {
  write_file_atomic(path, encode_pfm(grid));
}

inline Grid<float> read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }

/// Invalid pixels are written as 0.
inline Grid<float> depth_to_grid(const DepthMap& depth) {
  Grid<float> g(depth.width(), depth.height());
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      g(x, y) = depth.valid(x, y) ? static_cast<float>(depth.at(x, y)) : 0.0f;
  return g;
}

/// Non-finite or non-positive values become invalid pixels.
inline DepthMap grid_to_depth(const Grid<float>& g) {
  if (g.channels() != 1) throw std::runtime_error("depth pfm must have one channel");
  DepthMap d(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      if (std::isfinite(g(x, y)) && g(x, y) > 0.0f) d.set(x, y, g(x, y));
  return d;
}

inline void write_depth_pfm(const std::filesystem::path& path, const DepthMap& depth) {
  write_pfm(path, depth_to_grid(depth));
}

inline DepthMap read_depth_pfm(const std::filesystem::path& path) { return grid_to_depth(read_pfm(path)); }

}  // namespace focuskit::io
