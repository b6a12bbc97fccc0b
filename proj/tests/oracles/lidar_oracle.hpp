#pragma once

// Quadratic-time reference implementations for the point-cloud code.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "focuskit/geometry.hpp"
#include "focuskit/random.hpp"

namespace oracle {

using focuskit::PointCloud;
using focuskit::Vec3;

struct Hit {
  std::size_t index;
  double dist2;
};

inline std::optional<Hit> nearest(const std::vector<Vec3>& pts, const Vec3& q,
                                  double max_dist2 = std::numeric_limits<double>::infinity()) {
  std::optional<Hit> best;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d2 = (pts[i] - q).squaredNorm();
    if (d2 <= max_dist2 && (!best || d2 < best->dist2)) best = Hit{i, d2};
  }
  return best;
}

inline std::size_t count_within(const std::vector<Vec3>& pts, const Vec3& q, double r, std::size_t skip) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (i != skip && (pts[i] - q).squaredNorm() <= r * r) ++n;
  return n;
}

inline std::vector<std::size_t> density_keep(const PointCloud& c, const Vec3& origin, double alpha, int k) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double r = alpha * (c.points[i] - origin).norm();
    if (count_within(c.points, c.points[i], r, i) >= static_cast<std::size_t>(k)) keep.push_back(i);
  }
  return keep;
}

/// Pixel-major z-buffer: for every pixel, scan every point and keep the
/// smallest z whose rounded projection lies within radius + 1/2.
inline std::vector<double> zbuffer(const PointCloud& c, double fx, double fy, double cx, double cy, int w, int h,
                                   int radius) {
  std::vector<double> out(static_cast<std::size_t>(w) * static_cast<std::size_t>(h),
                          std::numeric_limits<double>::infinity());
  const double reach2 = (radius + 0.5) * (radius + 0.5);
  std::vector<std::pair<long, long>> centers;
  std::vector<double> zs;
  for (const auto& p : c.points) {
    if (!(p.z() > 0.0)) continue;
    centers.emplace_back(std::lround(std::floor(fx * p.x() / p.z() + cx + 0.5)),
                         std::lround(std::floor(fy * p.y() / p.z() + cy + 0.5)));
    zs.push_back(p.z());
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double& best = out[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
      for (std::size_t i = 0; i < zs.size(); ++i) {
        const double du = static_cast<double>(x - centers[i].first);
        const double dv = static_cast<double>(y - centers[i].second);
        if (du * du + dv * dv <= reach2 && zs[i] < best) best = zs[i];
      }
    }
  return out;
}

/// Winding-number inside test; equals even-odd for simple polygons.
inline bool inside_simple_polygon(const std::vector<std::pair<double, double>>& poly, double u, double v) {
  int wn = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto [x0, y0] = poly[i];
    const auto [x1, y1] = poly[(i + 1) % poly.size()];
    const double side = (x1 - x0) * (v - y0) - (u - x0) * (y1 - y0);
    if (y0 <= v) {
      if (y1 > v && side > 0) ++wn;
    } else if (y1 <= v && side < 0) {
      --wn;
    }
  }
  return wn != 0;
}

inline PointCloud random_cloud(std::size_t n, const Vec3& lo, const Vec3& hi, std::uint64_t seed) {
  focuskit::SeededRng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = rng.uniform(lo[a], hi[a]);
    c.points.push_back(p);
  }
  return c;
}

}  // namespace oracle
