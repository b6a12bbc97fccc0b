#pragma once

// Multi-frame Lidar aggregation with a distance-adaptive density filter.
//
//   G_0 = P_0
//   G_i = T_i(G_{i-1}) u P_i,  T_i = ICP(G_{i-1} -> P_i)
//   for i > warmup and i % interval == 0: drop points with fewer than k
//   neighbors within alpha * |x - sensor origin|.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "focuskit/core/parallel.hpp"
#include "focuskit/geometry.hpp"
#include "focuskit/icp.hpp"
#include "focuskit/kdtree.hpp"

namespace focuskit {

struct FilterParams {
  double alpha = 0.008;
  int k_neighbors = 7;
  int warmup_frames = 50;
  int interval_frames = 10;

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("filter: alpha must be > 0");
    if (k_neighbors < 0) throw std::invalid_argument("filter: k must be >= 0");
    if (warmup_frames < 1 || interval_frames < 1)
      throw std::invalid_argument("filter: warm-up and interval must be >= 1");
  }
};

/// Indices of points that have at least k neighbors (self excluded) within
/// alpha times their distance to the sensor origin.
inline std::vector<std::size_t> density_keep_indices(const PointCloud& cloud, const Vec3& sensor_origin,
                                                     const FilterParams& params) {
  params.validate();
  const auto k = static_cast<std::size_t>(params.k_neighbors);
  std::vector<std::size_t> keep;
  if (k == 0) {
    keep.resize(cloud.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    return keep;
  }
  const KdTree tree(cloud.points);
  std::vector<char> ok(cloud.size(), 0);
  parallel_for(0, static_cast<std::ptrdiff_t>(cloud.size()), [&](std::ptrdiff_t ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double radius = params.alpha * (cloud.points[i] - sensor_origin).norm();
    ok[i] = tree.count_within(cloud.points[i], radius, k, i) >= k;
  });
  for (std::size_t i = 0; i < ok.size(); ++i)
    if (ok[i]) keep.push_back(i);
  return keep;
}

inline PointCloud density_filter(const PointCloud& cloud, const Vec3& sensor_origin, const FilterParams& params) {
  return cloud.select(density_keep_indices(cloud, sensor_origin, params));
}

struct FilterEvent {
  std::size_t frame = 0;
  std::size_t before = 0;
  std::size_t removed = 0;
};

class AggregationError : public std::runtime_error {
 public:
  AggregationError(std::size_t frame, const std::string& what)
      : std::runtime_error("aggregation failed at frame " + std::to_string(frame) + ": " + what), frame_(frame) {}
  std::size_t frame() const { return frame_; }

 private:
  std::size_t frame_;
};

struct AggregateOptions {
  FilterParams filter;
  bool filtering = true;
  IcpParams icp{30, 0.5, 1e-6, 0.02, 3};
  Vec3 sensor_origin = Vec3::Zero();  // in each frame's own coordinates
};

struct AggregateResult {
  PointCloud cloud;
  std::vector<RigidTransform> transforms;  // T_i for i = 1..N-1
  std::vector<FilterEvent> filter_events;

  std::size_t removed_total() const {
    std::size_t n = 0;
    for (const auto& e : filter_events) n += e.removed;
    return n;
  }
};

inline AggregateResult aggregate(const std::vector<PointCloud>& frames, const AggregateOptions& opts = {}) {
  if (frames.empty()) throw std::invalid_argument("aggregate: need at least one frame");
  opts.filter.validate();
  AggregateResult result;
  result.cloud = frames.front();
  for (std::size_t i = 1; i < frames.size(); ++i) {
    IcpResult icp;
    try {
      icp = icp_register(result.cloud, frames[i], opts.icp);
    } catch (const IcpError& e) {
      throw AggregationError(i, e.what());
    }
    PointCloud merged = icp.transform.apply(result.cloud);
    merged.frame = frames[i].frame;
    merged.append(frames[i]);
    result.cloud = std::move(merged);
    result.transforms.push_back(icp.transform);

    const auto step = static_cast<std::size_t>(opts.filter.interval_frames);
    if (opts.filtering && i > static_cast<std::size_t>(opts.filter.warmup_frames) && i % step == 0) {
      const auto kept = density_keep_indices(result.cloud, opts.sensor_origin, opts.filter);
      result.filter_events.push_back({i, result.cloud.size(), result.cloud.size() - kept.size()});
      result.cloud = result.cloud.select(kept);
    }
  }
  return result;
}

}  // namespace focuskit
