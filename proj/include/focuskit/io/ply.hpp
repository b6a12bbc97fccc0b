#pragma once

// Binary little-endian PLY with float32 x, y, z and an optional float32
// intensity. The frame label travels in a "comment frame <label>" line;
// extra comment lines (provenance) are written verbatim and ignored on read.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "focuskit/geometry.hpp"
#include "focuskit/io/atomic_file.hpp"

namespace focuskit::io {

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

inline std::string encode_ply(const PointCloud& cloud, const std::vector<std::string>& comments = {}) {
  cloud.validate();
  const bool with_intensity = cloud.has_intensity();
  std::string extra;
  for (const auto& c : comments) {
    if (c.find('\n') != std::string::npos) throw std::invalid_argument("ply: comment must be a single line");
    extra += "comment " + c + "\n";
  }
  std::string out = "ply\nformat binary_little_endian 1.0\ncomment frame " + cloud.frame + "\n" + extra + "element vertex " +
                    std::to_string(cloud.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\n" +
                    (with_intensity ? "property float intensity\n" : "") + "end_header\n";
  const std::size_t stride = with_intensity ? 4 : 3;
  std::vector<float> body(cloud.size() * stride);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    body[i * stride + 0] = static_cast<float>(cloud.points[i].x());
    body[i * stride + 1] = static_cast<float>(cloud.points[i].y());
    body[i * stride + 2] = static_cast<float>(cloud.points[i].z());
    if (with_intensity) body[i * stride + 3] = cloud.intensity[i];
  }
  out.append(reinterpret_cast<const char*>(body.data()), body.size() * sizeof(float));
  return out;
}

inline PointCloud decode_ply(const std::string& bytes) {
  const std::size_t header_end = bytes.find("end_header\n");
  if (bytes.rfind("ply\n", 0) != 0 || header_end == std::string::npos) throw std::runtime_error("ply: bad header");
  std::istringstream header(bytes.substr(0, header_end));
  std::string line;
  std::size_t count = 0;
  bool saw_format = false;
  std::vector<std::string> props;
  PointCloud cloud;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") throw std::runtime_error("ply: only binary_little_endian is supported");
      saw_format = true;
    } else if (kw == "comment") {
      std::string key;
      ls >> key;
      if (key == "frame") ls >> cloud.frame;
    } else if (kw == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") throw std::runtime_error("ply: only a vertex element is supported");
    } else if (kw == "property") {
      std::string type;
      std::string name;
      ls >> type >> name;
      if (type != "float" && type != "float32") throw std::runtime_error("ply: only float properties are supported");
      props.push_back(name);
    }
  }
  if (!saw_format) throw std::runtime_error("ply: missing format line");
  if (props.size() < 3 || props[0] != "x" || props[1] != "y" || props[2] != "z")
    throw std::runtime_error("ply: expected x, y, z as the first properties");
  int intensity_at = -1;
  for (std::size_t i = 3; i < props.size(); ++i)
    if (props[i] == "intensity") intensity_at = static_cast<int>(i);

  const std::size_t stride = props.size();
  const std::size_t offset = header_end + std::string("end_header\n").size();
  if (bytes.size() - offset < count * stride * sizeof(float)) throw std::runtime_error("ply: truncated body");
  std::vector<float> body(count * stride);
  std::memcpy(body.data(), bytes.data() + offset, body.size() * sizeof(float));
  cloud.points.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    cloud.points[i] = Vec3(body[i * stride], body[i * stride + 1], body[i * stride + 2]);
  if (intensity_at >= 0) {
    cloud.intensity.resize(count);
    for (std::size_t i = 0; i < count; ++i) cloud.intensity[i] = body[i * stride + static_cast<std::size_t>(intensity_at)];
  }
  cloud.validate();
  return cloud;
}

inline void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
                      const std::vector<std::string>& comments = {}) {
  write_file_atomic(path, encode_ply(cloud, comments));
}

inline PointCloud read_ply(const std::filesystem::path& path) { return decode_ply(read_file(path)); }

}  // namespace focuskit::io
