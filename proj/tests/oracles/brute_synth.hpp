#pragma once

// Scatter-form defocus written without the library's kernel tables: every
// source pixel (including clamp-to-edge virtual sources within `pad`)
// splats its own normalized PSF onto the output.

#include <cmath>
#include <vector>

#include "focuskit/core/image.hpp"

namespace oracle {

inline double psf(double u, double v, double p, double c) {
  return std::exp(-2.0 * std::pow((u * u + v * v) / (c * c), p / 2.0)) / (c * c);
}

/// coc(x, y) in pixels per (clamped) source; radius(x, y) per source.
template <typename CocFn, typename RadiusFn>
focuskit::RgbImage scatter_blur(const focuskit::RgbImage& rgb, CocFn coc, RadiusFn radius, double p, int pad) {
  const int w = rgb.width();
  const int h = rgb.height();
  std::vector<double> acc(static_cast<std::size_t>(w) * h * 3, 0.0);
  std::vector<double> norm(static_cast<std::size_t>(w) * h, 0.0);
  for (int sy = -pad; sy < h + pad; ++sy) {
    for (int sx = -pad; sx < w + pad; ++sx) {
      const int cx = std::min(std::max(sx, 0), w - 1);
      const int cy = std::min(std::max(sy, 0), h - 1);
      const double c = coc(cx, cy);
      const int r = radius(cx, cy);
      std::vector<double> k((2 * r + 1) * (2 * r + 1));
      double total = 0.0;
      for (int v = -r; v <= r; ++v)
        for (int u = -r; u <= r; ++u) {
          const double val = (c < 0.25) ? (u == 0 && v == 0 ? 1.0 : 0.0) : psf(u, v, p, c);
          k[(v + r) * (2 * r + 1) + (u + r)] = val;
          total += val;
        }
      for (int v = -r; v <= r; ++v)
        for (int u = -r; u <= r; ++u) {
          const int qx = sx + u;
          const int qy = sy + v;
          if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
          const double wt = k[(v + r) * (2 * r + 1) + (u + r)] / total;
          const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
          norm[q] += wt;
          for (int ch = 0; ch < 3; ++ch) acc[q * 3 + ch] += wt * rgb(cx, cy, ch);
        }
    }
  }
  focuskit::RgbImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t q = static_cast<std::size_t>(y) * w + x;
      for (int ch = 0; ch < 3; ++ch) out(x, y, ch) = static_cast<float>(acc[q * 3 + ch] / norm[q]);
    }
  return out;
}

}  // namespace oracle
