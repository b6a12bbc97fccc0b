#pragma once

// Classical depth from focus: sum-modified-Laplacian focus measure and a
// per-pixel argmax over the stack, with optional parabolic refinement.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "focuskit/core/image.hpp"
#include "focuskit/synth.hpp"

namespace focuskit {

inline constexpr int kDefaultFocusWindow = 4;
inline constexpr double kTextureFloorRel = 1e-4;

struct FocusMeasureMap {
  int window_radius_px = kDefaultFocusWindow;
  std::vector<Grid<double>> scores;  // one H x W map per stack image
};

/// Modified Laplacian of the luminance with clamp-to-edge borders.
inline Grid<double> modified_laplacian(const RgbImage& image) {
  const int w = image.width();
  const int h = image.height();
  Grid<double> lum(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) lum(x, y) = image.luminance(x, y);
  Grid<double> ml(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double c2 = 2.0 * lum(x, y);
      ml(x, y) = std::abs(c2 - lum.clamped(x - 1, y) - lum.clamped(x + 1, y)) +
                 std::abs(c2 - lum.clamped(x, y - 1) - lum.clamped(x, y + 1));
    }
  }
  return ml;
}

/// Box sum over a (2r+1)^2 window; out-of-image cells contribute nothing.
inline Grid<double> box_sum(const Grid<double>& in, int radius) {
  const int w = in.width();
  const int h = in.height();
  Grid<double> rows(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dx = -radius; dx <= radius; ++dx) {
        const int sx = x + dx;
        if (sx >= 0 && sx < w) s += in(sx, y);
      }
      rows(x, y) = s;
    }
  }
  Grid<double> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int sy = y + dy;
        if (sy >= 0 && sy < h) s += rows(x, sy);
      }
      out(x, y) = s;
    }
  }
  return out;
}

inline FocusMeasureMap focus_measure(const FocusStack& stack, int window_radius_px = kDefaultFocusWindow) {
  if (window_radius_px < 1) throw std::invalid_argument("focus_measure: window radius must be >= 1");
  stack.validate();
  FocusMeasureMap fm;
  fm.window_radius_px = window_radius_px;
  fm.scores.resize(stack.size());
  parallel_for(0, static_cast<std::ptrdiff_t>(stack.size()), [&](std::ptrdiff_t i) {
    fm.scores[static_cast<std::size_t>(i)] =
        box_sum(modified_laplacian(stack.images[static_cast<std::size_t>(i)]), window_radius_px);
  });
  return fm;
}

/// Vertex abscissa of the parabola through three points (x0 < x1 < x2).
inline double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d01 = (y1 - y0) / (x1 - x0);
  const double d12 = (y2 - y1) / (x2 - x1);
  const double a = (d12 - d01) / (x2 - x0);
  if (!(a < 0.0)) return x1;
  const double b = d01 - a * (x0 + x1);
  return -b / (2.0 * a);
}

/// Abscissa used for the sub-sample parabola fit.
enum class RefineAxis { log_disparity, disparity };

struct DfoOptions {
  int window_radius_px = kDefaultFocusWindow;
  bool refine = true;
  RefineAxis refine_axis = RefineAxis::disparity;
  double texture_floor_rel = kTextureFloorRel;
};

/// Per-pixel depth estimate. Pixels whose peak focus measure does not exceed
/// texture_floor_rel times the maximum of the winning image are left invalid.
inline DepthMap estimate_depth(const FocusStack& stack, const DfoOptions& opts = {}) {
  stack.validate();
  if (stack.size() < 2) throw std::invalid_argument("estimate_depth: need at least 2 images");

  std::vector<std::size_t> order(stack.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return stack.focus_distances_m[a] < stack.focus_distances_m[b];
  });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (!(stack.focus_distances_m[order[i]] > stack.focus_distances_m[order[i - 1]]))
      throw std::invalid_argument("estimate_depth: focus distances must be distinct");

  const FocusMeasureMap fm = focus_measure(stack, opts.window_radius_px);
  const int w = stack.images.front().width();
  const int h = stack.images.front().height();
  const std::size_t m = stack.size();

  std::vector<const Grid<double>*> sorted(m);
  std::vector<double> fds(m);
  std::vector<double> axis(m);
  std::vector<double> floor_value(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    sorted[i] = &fm.scores[order[i]];
    fds[i] = stack.focus_distances_m[order[i]];
    axis[i] = opts.refine_axis == RefineAxis::disparity ? 1.0 / fds[i] : -std::log(fds[i]);
    for (double v : sorted[i]->data()) floor_value[i] = std::max(floor_value[i], v);
    floor_value[i] *= opts.texture_floor_rel;
  }

  DepthMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < m; ++i)
        if ((*sorted[i])(x, y) > (*sorted[best])(x, y)) best = i;
      const double peak = (*sorted[best])(x, y);
      if (!(peak > floor_value[best])) continue;
      double d = fds[best];
      if (opts.refine && best > 0 && best + 1 < m) {
        // Sorted ascending in depth means descending along the axis; flip to ascending.
        const double xv = parabola_vertex(axis[best + 1], (*sorted[best + 1])(x, y), axis[best], peak,
                                          axis[best - 1], (*sorted[best - 1])(x, y));
        d = opts.refine_axis == RefineAxis::disparity ? 1.0 / xv : std::exp(-xv);
      }
      out.set(x, y, std::clamp(d, fds.front(), fds.back()));
    }
  }
  return out;
}

}  // namespace focuskit
