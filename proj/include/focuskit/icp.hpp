#pragma once

// Point-to-point ICP: gated nearest-neighbor correspondences and a
// closed-form rigid fit from the SVD of the cross-covariance.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "focuskit/geometry.hpp"
#include "focuskit/kdtree.hpp"

namespace focuskit {

class IcpError : public std::runtime_error {
 public:
  explicit IcpError(const std::string& what, double residual = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct IcpParams {
  int max_iterations = 30;
  double max_correspondence_distance = 0.5;
  double tolerance = 1e-6;
  double voxel_size = 0.0;  // > 0 downsamples the source before matching
  std::size_t min_correspondences = 3;
};

struct IcpResult {
  RigidTransform transform;
  double rms = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t correspondences = 0;
};

/// Centroid per occupied voxel, ordered by voxel key.
inline std::vector<Vec3> voxel_downsample(const std::vector<Vec3>& points, double voxel) {
  if (!(voxel > 0.0)) return points;
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::pair<Vec3, std::size_t>> cells;
  for (const auto& p : points) {
    const auto key = std::make_tuple(static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                                     static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                                     static_cast<std::int64_t>(std::floor(p.z() / voxel)));
    auto& cell = cells[key];
    if (cell.second == 0) cell.first = Vec3::Zero();
    cell.first += p;
    ++cell.second;
  }
  std::vector<Vec3> out;
  out.reserve(cells.size());
  for (const auto& [key, cell] : cells) out.push_back(cell.first / static_cast<double>(cell.second));
  return out;
}

/// True when the points span at least a plane (not coincident or collinear).
inline bool spans_plane(const std::vector<Vec3>& points, double tol = 1e-9) {
  if (points.size() < 3) return false;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(points.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const auto ev = es.eigenvalues();  // ascending
  return ev(2) > tol && ev(1) > tol * ev(2);
}

/// Least-squares rotation and translation with dst ~ R src + t.
inline RigidTransform fit_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size() || src.size() < 3) throw IcpError("fit_rigid: need >= 3 paired points");
  Vec3 cs = Vec3::Zero();
  Vec3 cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  RigidTransform t;
  t.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  t.translation = cd - t.rotation * cs;
  return t;
}

/// Returns the transform mapping `source` onto `target`.
inline IcpResult icp_register(const PointCloud& source, const PointCloud& target, const IcpParams& params = {}) {
  source.validate();
  target.validate();
  if (!spans_plane(source.points) || !spans_plane(target.points))
    throw IcpError("icp: degenerate geometry (fewer than 3 non-collinear points)");

  const std::vector<Vec3> src = voxel_downsample(source.points, params.voxel_size);
  const KdTree tree(target.points);
  const double gate2 = params.max_correspondence_distance * params.max_correspondence_distance;

  IcpResult result;
  result.transform = RigidTransform::identity(source.frame, target.frame);
  double prev_rms = std::numeric_limits<double>::infinity();
  std::vector<Vec3> from;
  std::vector<Vec3> to;
  for (int it = 0; it < params.max_iterations; ++it) {
    from.clear();
    to.clear();
    for (const auto& p : src) {
      if (auto nn = tree.nearest(result.transform.apply(p), gate2)) {
        from.push_back(p);
        to.push_back(tree.point(nn->index));
      }
    }
    if (from.size() < std::max<std::size_t>(3, params.min_correspondences))
      throw IcpError("icp: too few correspondences within the gate", prev_rms);

    RigidTransform fit = fit_rigid(from, to);
    result.transform.rotation = fit.rotation;
    result.transform.translation = fit.translation;
    double sq = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i) sq += (result.transform.apply(from[i]) - to[i]).squaredNorm();
    result.rms = std::sqrt(sq / static_cast<double>(from.size()));
    result.iterations = it + 1;
    result.correspondences = from.size();
    if (std::abs(prev_rms - result.rms) < params.tolerance) {
      result.converged = true;
      break;
    }
    prev_rms = result.rms;
  }
  return result;
}

}  // namespace focuskit
