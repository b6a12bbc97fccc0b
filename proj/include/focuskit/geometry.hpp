#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace focuskit {

using Vec3 = Eigen::Vector3d;

struct PointCloud {
  std::vector<Vec3> points;
  std::string frame = "world";
  std::vector<float> intensity;  // empty, or one value per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_intensity() const { return !intensity.empty(); }

  void validate() const {
    if (frame.empty()) throw std::invalid_argument("point cloud: empty frame label");
    if (has_intensity() && intensity.size() != points.size())
      throw std::invalid_argument("point cloud: intensity count differs from point count");
    for (const auto& p : points)
      if (!p.allFinite()) throw std::invalid_argument("point cloud: non-finite coordinate");
  }

  /// Subset by index list, preserving order.
  PointCloud select(const std::vector<std::size_t>& keep) const {
    PointCloud out;
    out.frame = frame;
    out.points.reserve(keep.size());
    for (std::size_t i : keep) out.points.push_back(points[i]);
    if (has_intensity()) {
      out.intensity.reserve(keep.size());
      for (std::size_t i : keep) out.intensity.push_back(intensity[i]);
    }
    return out;
  }

  /// Appends other's points; intensities are kept only if both clouds carry them.
  void append(const PointCloud& other) {
    const bool keep_intensity = (has_intensity() || empty()) && other.has_intensity();
    if (!keep_intensity) intensity.clear();
    points.insert(points.end(), other.points.begin(), other.points.end());
    if (keep_intensity) intensity.insert(intensity.end(), other.intensity.begin(), other.intensity.end());
  }

  friend bool operator==(const PointCloud& a, const PointCloud& b) {
    return a.frame == b.frame && a.points == b.points && a.intensity == b.intensity;
  }
};

/// Maps points expressed in `source` into `target`: x' = R x + t.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();
  std::string source = "source";
  std::string target = "target";

  static RigidTransform identity(std::string source = "source", std::string target = "target") {
    RigidTransform t;
    t.source = std::move(source);
    t.target = std::move(target);
    return t;
  }

  static RigidTransform from_matrix(const Eigen::Matrix4d& m, std::string source, std::string target,
                                   double tol = 1e-9) {
    if (std::abs(m(3, 0)) + std::abs(m(3, 1)) + std::abs(m(3, 2)) > 1e-12 || std::abs(m(3, 3) - 1.0) > 1e-12)
      throw std::invalid_argument("rigid transform: last row must be [0 0 0 1]");
    RigidTransform t;
    t.rotation = m.topLeftCorner<3, 3>();
    t.translation = m.topRightCorner<3, 1>();
    t.source = std::move(source);
    t.target = std::move(target);
    t.validate(tol);
    return t;
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  PointCloud apply(const PointCloud& cloud) const {
    PointCloud out = cloud;
    for (auto& p : out.points) p = apply(p);
    out.frame = target;
    return out;
  }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    inv.source = target;
    inv.target = source;
    return inv;
  }

  /// (*this) after `first`: maps first.source -> this->target.
  RigidTransform compose(const RigidTransform& first) const {
    RigidTransform out;
    out.rotation = rotation * first.rotation;
    out.translation = rotation * first.translation + translation;
    out.source = first.source;
    out.target = target;
    return out;
  }

  /// Rotation angle in radians.
  double angle() const {
    const double c = std::clamp((rotation.trace() - 1.0) * 0.5, -1.0, 1.0);
    return std::acos(c);
  }

  void validate(double tol = 1e-9) const {
    if (!rotation.allFinite() || !translation.allFinite())
      throw std::invalid_argument("rigid transform: non-finite entries");
    if ((rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol)
      throw std::invalid_argument("rigid transform: rotation not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > tol)
      throw std::invalid_argument("rigid transform: rotation determinant != +1");
  }
};

}  // namespace focuskit
