#pragma once

// Thin-lens circle of confusion and the generalized PSF family
// exp(-2 (r^2/c^2)^(p/2)) / c^2, which is Gaussian at p = 2 and tends to a
// uniform disk of radius c as p grows.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace focuskit {

struct PrincipalPoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const PrincipalPoint&, const PrincipalPoint&) = default;
};

struct ThinLensConfig {
  double focal_length_m = 0.05;
  double f_number = 2.8;
  double pixel_pitch_m = 4.3e-6;
  PrincipalPoint principal_point{};
  double focal_length_px = 0.05 / 4.3e-6;

  static ThinLensConfig make(double focal_length_m, double f_number, double pixel_pitch_m,
                             PrincipalPoint pp = {}) {
    ThinLensConfig lens{focal_length_m, f_number, pixel_pitch_m, pp,
                        focal_length_m / pixel_pitch_m};
    lens.validate();
    return lens;
  }

  void validate() const {
    if (!(focal_length_m > 0.0)) throw std::invalid_argument("lens: focal_length_m must be > 0");
    if (!(f_number > 0.0)) throw std::invalid_argument("lens: f_number must be > 0");
    if (!(pixel_pitch_m > 0.0)) throw std::invalid_argument("lens: pixel_pitch_m must be > 0");
    if (std::abs(focal_length_px * pixel_pitch_m - focal_length_m) > 1e-9 * focal_length_m) {
      throw std::invalid_argument("lens: focal_length_px * pixel_pitch_m != focal_length_m");
    }
  }

  friend bool operator==(const ThinLensConfig&, const ThinLensConfig&) = default;
};

inline constexpr double kDefaultPsfCutoff = 1e-3;
inline constexpr int kMaxKernelRadius = 64;
/// CoC scales below this many pixels produce the identity kernel.
inline constexpr double kIdentityScalePx = 0.25;

struct PsfSpec {
  double shape_p = 2.0;
  double scale_c_px = 0.0;
  double cutoff_rel = kDefaultPsfCutoff;

  void validate() const {
    if (!(shape_p >= 1.0)) throw std::invalid_argument("psf: shape_p must be >= 1");
    if (!(scale_c_px >= 0.0) || !std::isfinite(scale_c_px))
      throw std::invalid_argument("psf: scale_c_px must be finite and >= 0");
    if (!(cutoff_rel > 0.0 && cutoff_rel <= 1.0))
      throw std::invalid_argument("psf: cutoff_rel must be in (0, 1]");
  }
};

/// (2r+1) x (2r+1) weights, row-major, summing to one.
struct DiscreteKernel {
  int radius_px = 0;
  std::vector<double> weights{1.0};

  int size() const { return 2 * radius_px + 1; }
  double at(int du, int dv) const {
    return weights[static_cast<std::size_t>(dv + radius_px) * size() + (du + radius_px)];
  }
};

/// Circle of confusion in meters on the sensor.
inline double coc_meters(double depth_m, const ThinLensConfig& lens, double focus_distance_m) {
  if (!(depth_m > 0.0) || !std::isfinite(depth_m))
    throw std::domain_error("coc: depth must be finite and > 0");
  if (!(focus_distance_m > lens.focal_length_m))
    throw std::domain_error("coc: focus distance must exceed focal length");
  const double f = lens.focal_length_m;
  return std::abs(depth_m - focus_distance_m) / depth_m * (f * f) /
         (lens.f_number * (focus_distance_m - f));
}

inline double coc_pixels(double depth_m, const ThinLensConfig& lens, double focus_distance_m) {
  return coc_meters(depth_m, lens, focus_distance_m) / lens.pixel_pitch_m;
}

/// Unnormalized generalized PSF at pixel offset (u, v).
inline double psf_value(double u, double v, const PsfSpec& spec) {
  if (!(spec.scale_c_px > 0.0)) throw std::domain_error("psf: scale must be > 0");
  const double c2 = spec.scale_c_px * spec.scale_c_px;
  const double r2 = (u * u + v * v) / c2;
  return std::exp(-2.0 * std::pow(r2, 0.5 * spec.shape_p)) / c2;
}

/// Smallest radius whose next ring falls below the cutoff, capped at kMaxKernelRadius.
inline int kernel_radius(const PsfSpec& spec) {
  const double center = psf_value(0.0, 0.0, spec);
  int r = 0;
  while (r < kMaxKernelRadius && psf_value(r + 0.5, 0.0, spec) > spec.cutoff_rel * center) ++r;
  if (spec.shape_p >= 8.0) r = std::max(r, static_cast<int>(std::ceil(spec.scale_c_px)));
  return std::min(r, kMaxKernelRadius);
}

inline DiscreteKernel make_kernel(const PsfSpec& spec) {
  spec.validate();
  if (spec.scale_c_px < kIdentityScalePx) return DiscreteKernel{};
  DiscreteKernel k;
  k.radius_px = kernel_radius(spec);
  const int n = k.size();
  k.weights.assign(static_cast<std::size_t>(n) * n, 0.0);
  double sum = 0.0;
  for (int dv = -k.radius_px; dv <= k.radius_px; ++dv) {
    for (int du = -k.radius_px; du <= k.radius_px; ++du) {
      const double w = psf_value(du, dv, spec);
      k.weights[static_cast<std::size_t>(dv + k.radius_px) * n + (du + k.radius_px)] = w;
      sum += w;
    }
  }
  for (double& w : k.weights) w /= sum;
  return k;
}

}  // namespace focuskit
