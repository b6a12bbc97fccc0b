#pragma once

// Training-time domain randomization: PSF shape, f-number, focus-distance
// bounds, and the power-law interpolation of focus distances between them.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "focuskit/core/image.hpp"
#include "focuskit/random.hpp"

namespace focuskit {

enum class FdMode { percentile, automatic, mixed };

inline std::string to_string(FdMode m) {
  switch (m) {
    case FdMode::percentile: return "percentile";
    case FdMode::automatic: return "automatic";
    case FdMode::mixed: return "mixed";
  }
  return "mixed";
}

inline FdMode parse_fd_mode(const std::string& s) {
  if (s == "percentile") return FdMode::percentile;
  if (s == "automatic") return FdMode::automatic;
  if (s == "mixed") return FdMode::mixed;
  throw std::invalid_argument("unknown focus-distance mode: " + s);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct FdSamplerConfig {
  FdMode mode = FdMode::mixed;
  double percentile_weight = 1.0;
  double automatic_weight = 4.0;
  int stack_size = 5;
  Interval percentile_bounds{5.0, 95.0};
  Interval auto_near{0.6, 1.0};
  Interval auto_far_multiplier{7.0, 15.0};
  Interval kappa{0.0, 1.0};

  void validate() const {
    if (stack_size < 2) throw std::invalid_argument("fd sampler: stack size must be >= 2");
    if (!(percentile_weight >= 0.0 && automatic_weight >= 0.0) ||
        percentile_weight + automatic_weight <= 0.0)
      throw std::invalid_argument("fd sampler: invalid mix ratio");
    if (!(kappa.lo >= 0.0 && kappa.hi <= 1.0 && kappa.lo <= kappa.hi))
      throw std::invalid_argument("fd sampler: kappa range must lie in [0, 1]");
    if (!(auto_near.lo > 0.0 && auto_far_multiplier.lo > 1.0))
      throw std::invalid_argument("fd sampler: automatic bounds must give near < far");
  }
};

struct BlurSamplerConfig {
  Interval log2_p{1.0, 5.0};
  std::vector<double> f_numbers{1.0, 1.4, 2.0, 2.8, 4.0};
};

/// p = 2^u for a given exponent u.
inline double psf_shape_from_exponent(double u) { return std::exp2(u); }

inline double sample_psf_shape(SeededRng& rng, const BlurSamplerConfig& cfg = {}) {
  return psf_shape_from_exponent(rng.uniform(cfg.log2_p.lo, cfg.log2_p.hi));
}

inline double sample_f_number(SeededRng& rng, const BlurSamplerConfig& cfg = {}) {
  return cfg.f_numbers.at(rng.index(cfg.f_numbers.size()));
}

/// Percentile q in [0, 100] with linear interpolation between order statistics.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

struct FdBounds {
  double near_m = 0.0;
  double far_m = 0.0;
  FdMode source = FdMode::automatic;
};

inline constexpr std::size_t kMinPercentilePixels = 20;

inline FdBounds percentile_bounds(const DepthMap& depth, const FdSamplerConfig& cfg) {
  auto values = depth.valid_values();
  if (values.size() < kMinPercentilePixels)
    throw std::invalid_argument("fd sampler: percentile mode needs >= 20 valid depth pixels");
  return {percentile(values, cfg.percentile_bounds.lo), percentile(values, cfg.percentile_bounds.hi),
          FdMode::percentile};
}

inline FdBounds sample_fd_bounds(const DepthMap* depth, const FdSamplerConfig& cfg, SeededRng& rng) {
  cfg.validate();
  FdMode mode = cfg.mode;
  if (mode == FdMode::mixed) {
    const double p_percentile = cfg.percentile_weight / (cfg.percentile_weight + cfg.automatic_weight);
    mode = rng.uniform() < p_percentile ? FdMode::percentile : FdMode::automatic;
  }
  if (mode == FdMode::percentile) {
    if (depth == nullptr) throw std::invalid_argument("fd sampler: percentile mode needs a depth map");
    return percentile_bounds(*depth, cfg);
  }
  const double near = rng.uniform(cfg.auto_near.lo, cfg.auto_near.hi);
  const double far = near * rng.uniform(cfg.auto_far_multiplier.lo, cfg.auto_far_multiplier.hi);
  return {near, far, FdMode::automatic};
}

/// Below this kappa the log-space limit replaces the power-mean formula.
inline constexpr double kKappaLimit = 1e-4;

/// S focus distances between near and far, power-law spaced in disparity.
/// kappa = 1 is uniform in 1/z; kappa -> 0 is uniform in log z.
inline std::vector<double> interpolate_fds(double near_m, double far_m, int stack_size, double kappa) {
  if (!(near_m > 0.0 && near_m < far_m) || !std::isfinite(far_m))
    throw std::invalid_argument("interpolate_fds: need 0 < near < far");
  if (stack_size < 2) throw std::invalid_argument("interpolate_fds: stack size must be >= 2");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw std::invalid_argument("interpolate_fds: kappa must be in [0, 1]");

  std::vector<double> out(static_cast<std::size_t>(stack_size));
  const double a = std::pow(near_m, -kappa);
  const double b = std::pow(far_m, -kappa);
  for (int i = 0; i < stack_size; ++i) {
    const double t = static_cast<double>(i) / (stack_size - 1);
    if (kappa < kKappaLimit) {
      out[static_cast<std::size_t>(i)] = std::pow(near_m, 1.0 - t) * std::pow(far_m, t);
    } else {
      out[static_cast<std::size_t>(i)] = std::pow((1.0 - t) * a + t * b, -1.0 / kappa);
    }
  }
  out.front() = near_m;
  out.back() = far_m;
  return out;
}

/// One complete draw of the blur and focus-distance randomization.
struct StackSample {
  FdBounds bounds;
  double kappa = 1.0;
  double psf_shape_p = 2.0;
  double f_number = 2.8;
  std::vector<double> focus_distances_m;
};

inline StackSample sample_stack(const DepthMap* depth, const FdSamplerConfig& fd_cfg,
                                const BlurSamplerConfig& blur_cfg, SeededRng& rng) {
  StackSample s;
  s.psf_shape_p = sample_psf_shape(rng, blur_cfg);
  s.f_number = sample_f_number(rng, blur_cfg);
  s.bounds = sample_fd_bounds(depth, fd_cfg, rng);
  s.kappa = rng.uniform(fd_cfg.kappa.lo, fd_cfg.kappa.hi);
  if (!(s.bounds.near_m < s.bounds.far_m))
    throw std::invalid_argument("fd sampler: degenerate depth range (near == far)");
  s.focus_distances_m = interpolate_fds(s.bounds.near_m, s.bounds.far_m, fd_cfg.stack_size, s.kappa);
  return s;
}

}  // namespace focuskit
