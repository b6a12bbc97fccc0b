#pragma once

// Straightforward long-double evaluations of the depth metrics.

#include <cmath>
#include <map>
#include <vector>

#include "focuskit/core/image.hpp"

namespace oracle {

struct Metrics {
  long double abs_rel = 0, sq_rel = 0, mse = 0, silog = 0, grad = 0;
  std::map<double, long double> delta;
};

inline Metrics metrics(const focuskit::DepthMap& pred, const focuskit::DepthMap& gt,
                       const std::vector<double>& thresholds, long double lambda, int scales) {
  Metrics m;
  long double n = 0, g1 = 0, g2 = 0;
  std::map<double, long double> hits;
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      if (!pred.valid(x, y) || !gt.valid(x, y)) continue;
      const long double p = pred.at(x, y);
      const long double g = gt.at(x, y);
      n += 1;
      m.abs_rel += std::fabs(p - g) / g;
      m.sq_rel += (p - g) * (p - g) / g;
      m.mse += (p - g) * (p - g);
      const long double r = std::log(p) - std::log(g);
      g1 += r;
      g2 += r * r;
      for (double k : thresholds) hits[k] += (std::max(p / g, g / p) < k) ? 1 : 0;
    }
  m.abs_rel /= n;
  m.sq_rel /= n;
  m.mse /= n;
  m.silog = std::sqrt(g2 / n - lambda * (g1 / n) * (g1 / n));
  for (double k : thresholds) m.delta[k] = hits[k] / n;

  long double total = 0;
  for (int s = 0; s < scales; ++s) {
    const int st = 1 << s;
    long double sx = 0, nx = 0, sy = 0, ny = 0;
    auto ok = [&](int x, int y) { return pred.valid(x, y) && gt.valid(x, y); };
    auto res = [&](int x, int y) {
      return std::log(static_cast<long double>(pred.at(x, y))) - std::log(static_cast<long double>(gt.at(x, y)));
    };
    for (int y = 0; y < gt.height(); y += st)
      for (int x = 0; x < gt.width(); x += st) {
        if (!ok(x, y)) continue;
        if (x + st < gt.width() && ok(x + st, y)) sx += std::fabs(res(x + st, y) - res(x, y)), nx += 1;
        if (y + st < gt.height() && ok(x, y + st)) sy += std::fabs(res(x, y + st) - res(x, y)), ny += 1;
      }
    total += (nx > 0 ? sx / nx : 0) + (ny > 0 ? sy / ny : 0);
  }
  m.grad = total / scales;
  return m;
}

}  // namespace oracle
