#pragma once

// Synthetic Lidar sweep inside an axis-aligned box room. Every frame is
// expressed in the sensor's own coordinates. Point intensity carries the
// ground-truth label: 0 for wall returns, 1 for injected floaters.

#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "focuskit/geometry.hpp"
#include "focuskit/random.hpp"

namespace focuskit::sim {

inline constexpr float kStructureLabel = 0.0f;
inline constexpr float kFloaterLabel = 1.0f;

struct RoomSweepConfig {
  Vec3 room_min{-4.0, -3.0, -1.5};
  Vec3 room_max{4.0, 3.0, 1.5};
  int frames = 120;
  int elevation_rays = 24;
  int azimuth_rays = 48;
  double elevation_span_deg = 90.0;
  double range_noise_m = 0.002;
  double step_m = 0.0005;      // sensor translation per frame
  double yaw_step_rad = 0.0005;
  int floaters_per_frame = 5;
  int floater_first_frame = 61;
  int floater_last_frame = 110;
  double floater_margin_m = 0.3;
  std::uint64_t seed = 7;
};

struct RoomSweep {
  std::vector<PointCloud> frames;
  std::vector<RigidTransform> sensor_to_world;
  std::size_t floaters = 0;
};

inline RigidTransform sweep_pose(const RoomSweepConfig& cfg, int i) {
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(cfg.yaw_step_rad * i, Vec3::UnitZ()).toRotationMatrix();
  t.translation = Vec3(cfg.step_m * i, 0.5 * cfg.step_m * i, 0.1 * cfg.step_m * i);
  t.source = "frame_" + std::to_string(i);
  t.target = "world";
  return t;
}

/// Distance along a unit ray from an interior origin to the box boundary.
inline double box_exit_distance(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi) {
  double t = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] > 0.0) t = std::min(t, (hi[a] - origin[a]) / dir[a]);
    if (dir[a] < 0.0) t = std::min(t, (lo[a] - origin[a]) / dir[a]);
  }
  return t;
}

inline RoomSweep simulate_room_sweep(const RoomSweepConfig& cfg) {
  SeededRng rng(cfg.seed);
  RoomSweep out;
  const double el_span = cfg.elevation_span_deg * M_PI / 180.0;
  for (int i = 0; i < cfg.frames; ++i) {
    const RigidTransform pose = sweep_pose(cfg, i);
    PointCloud frame;
    frame.frame = pose.source;
    for (int e = 0; e < cfg.elevation_rays; ++e) {
      const double el = -0.5 * el_span + el_span * (e + 0.5) / cfg.elevation_rays;
      for (int a = 0; a < cfg.azimuth_rays; ++a) {
        const double az = 2.0 * M_PI * a / cfg.azimuth_rays;
        const Vec3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
        const double range = box_exit_distance(pose.translation, pose.rotation * dir, cfg.room_min, cfg.room_max);
        frame.points.push_back(dir * (range + cfg.range_noise_m * rng.normal()));
        frame.intensity.push_back(kStructureLabel);
      }
    }
    if (i >= cfg.floater_first_frame && i <= cfg.floater_last_frame) {
      const RigidTransform world_to_sensor = pose.inverse();
      for (int f = 0; f < cfg.floaters_per_frame; ++f) {
        Vec3 w;
        for (int a = 0; a < 3; ++a)
          w[a] = rng.uniform(cfg.room_min[a] + cfg.floater_margin_m, cfg.room_max[a] - cfg.floater_margin_m);
        frame.points.push_back(world_to_sensor.apply(w));
        frame.intensity.push_back(kFloaterLabel);
        ++out.floaters;
      }
    }
    out.frames.push_back(std::move(frame));
    out.sensor_to_world.push_back(pose);
  }
  return out;
}

}  // namespace focuskit::sim
