#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "focuskit/core/image.hpp"
#include "focuskit/geometry.hpp"

namespace focuskit {

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const {
    if (!(fx > 0.0 && fy > 0.0)) throw std::invalid_argument("intrinsics: focal lengths must be > 0");
  }

  /// Continuous pixel coordinates; pixel (i, j) is centered at (i, j).
  std::pair<double, double> project(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }
};

/// P_cam = camT_lidar * lidarT_world * P_world.
inline PointCloud chain_to_camera(const PointCloud& p_world, const RigidTransform& t_cam_lidar,
                                  const RigidTransform& t_lidar_world) {
  if (p_world.frame != t_lidar_world.source)
    throw std::invalid_argument("chain_to_camera: cloud frame '" + p_world.frame + "' != transform source '" +
                                t_lidar_world.source + "'");
  if (t_lidar_world.target != t_cam_lidar.source)
    throw std::invalid_argument("chain_to_camera: transforms do not compose ('" + t_lidar_world.target + "' vs '" +
                                t_cam_lidar.source + "')");
  PointCloud out = p_world;
  for (auto& p : out.points) p = t_cam_lidar.apply(t_lidar_world.apply(p));
  out.frame = t_cam_lidar.target;
  return out;
}

/// Integer offsets covered by a splat of the given pixel radius: every pixel
/// whose center lies within radius + 1/2 of the hit pixel's center.
inline std::vector<std::pair<int, int>> splat_offsets(int radius_px) {
  if (radius_px < 0) throw std::invalid_argument("splat radius must be >= 0");
  const double reach = radius_px + 0.5;
  std::vector<std::pair<int, int>> out;
  for (int dv = -radius_px; dv <= radius_px; ++dv)
    for (int du = -radius_px; du <= radius_px; ++du)
      if (du * du + dv * dv <= reach * reach) out.emplace_back(du, dv);
  return out;
}

/// Z-buffered splatting: each point with z > 0 paints a solid disk around the
/// pixel nearest its projection; the smallest z wins per pixel.
inline DepthMap project_zbuffer(const PointCloud& p_cam, const Intrinsics& k, int width, int height,
                                int splat_radius_px) {
  k.validate();
  const auto offsets = splat_offsets(splat_radius_px);
  Grid<double> zbuf(width, height, 1, std::numeric_limits<double>::infinity());
  for (const auto& p : p_cam.points) {
    if (!(p.z() > 0.0) || !p.allFinite()) continue;
    const auto [u, v] = k.project(p);
    const double pu = std::floor(u + 0.5);
    const double pv = std::floor(v + 0.5);
    if (pu < -splat_radius_px || pv < -splat_radius_px || pu > width - 1 + splat_radius_px ||
        pv > height - 1 + splat_radius_px)
      continue;
    const int cu = static_cast<int>(pu);
    const int cv = static_cast<int>(pv);
    for (const auto& [du, dv] : offsets) {
      const int x = cu + du;
      const int y = cv + dv;
      if (x < 0 || y < 0 || x >= width || y >= height) continue;
      double& z = zbuf(x, y);
      if (p.z() < z) z = p.z();
    }
  }
  DepthMap out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (std::isfinite(zbuf(x, y))) out.set(x, y, zbuf(x, y));
  return out;
}

struct Pixel2 {
  double u = 0.0;
  double v = 0.0;
};

/// Even-odd rule.
inline bool point_in_polygon(const std::vector<Pixel2>& poly, double u, double v) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.v > v) != (b.v > v)) {
      const double cross_u = (b.u - a.u) * (v - a.v) / (b.v - a.v) + a.u;
      if (u < cross_u) inside = !inside;
    }
  }
  return inside;
}

/// Camera used to interpret an image-space selection.
struct CameraView {
  Intrinsics intrinsics;
  RigidTransform cloud_to_camera = RigidTransform::identity();
};

struct DepthRange {
  double z_min = 0.0;
  double z_max = std::numeric_limits<double>::infinity();
};

inline std::vector<std::size_t> region_member_indices(const PointCloud& cloud, const CameraView& view,
                                                      const std::vector<Pixel2>& polygon, const DepthRange& range) {
  if (polygon.size() < 3) throw std::invalid_argument("region: polygon needs at least 3 vertices");
  if (!(range.z_min <= range.z_max)) throw std::invalid_argument("region: z_min must be <= z_max");
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 pc = view.cloud_to_camera.apply(cloud.points[i]);
    if (!(pc.z() > 0.0) || pc.z() < range.z_min || pc.z() > range.z_max) continue;
    const auto [u, v] = view.intrinsics.project(pc);
    if (point_in_polygon(polygon, u, v)) members.push_back(i);
  }
  return members;
}

/// Removes points that project inside the polygon and whose camera-space
/// depth lies in [z_min, z_max].
inline PointCloud remove_by_region(const PointCloud& cloud, const CameraView& view, const std::vector<Pixel2>& polygon,
                                   const DepthRange& range) {
  const auto members = region_member_indices(cloud, view, polygon, range);
  std::vector<std::size_t> keep;
  keep.reserve(cloud.size() - members.size());
  std::size_t m = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (m < members.size() && members[m] == i) {
      ++m;
      continue;
    }
    keep.push_back(i);
  }
  return cloud.select(keep);
}

}  // namespace focuskit
