#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

#include "focuskit/core/image.hpp"
#include "focuskit/core/reduce.hpp"

namespace focuskit {

struct LossConfig {
  double silog_lambda = 0.5;
  int grad_scales = 4;
  double grad_weight = 0.1;
};

struct MetricsReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  std::map<double, double> delta;
  double silog = 0.0;
  double grad_match = 0.0;
  double total_loss = 0.0;
  std::size_t n_valid = 0;
};

inline const std::vector<double>& default_thresholds() {
  static const std::vector<double> t{1.05, 1.15, 1.25};
  return t;
}

namespace detail {

struct PixelPairs {
  std::vector<double> pred;
  std::vector<double> gt;
};

inline void require_same_size(const DepthMap& pred, const DepthMap& gt) {
  if (!pred.same_size(gt.width(), gt.height()))
    throw std::invalid_argument("metrics: prediction and ground truth differ in size");
}

/// Values on the intersection of both validity masks, in raster order.
inline PixelPairs shared_valid(const DepthMap& pred, const DepthMap& gt) {
  require_same_size(pred, gt);
  PixelPairs p;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!pred.valid(x, y) || !gt.valid(x, y)) continue;
      if (!(gt.at(x, y) > 0.0)) throw std::domain_error("metrics: non-positive ground truth");
      if (!(pred.at(x, y) > 0.0)) throw std::domain_error("metrics: non-positive prediction");
      p.pred.push_back(pred.at(x, y));
      p.gt.push_back(gt.at(x, y));
    }
  }
  if (p.gt.empty()) throw std::invalid_argument("metrics: empty shared validity mask");
  return p;
}

}  // namespace detail

/// sqrt(mean(g^2) - lambda mean(g)^2), g = log pred - log gt, evaluated as
/// sqrt(var(g) + (1 - lambda) mean(g)^2) so the radicand stays non-negative.
inline double silog_loss(const DepthMap& pred, const DepthMap& gt, double lambda = 0.5) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("silog: lambda must be in [0, 1]");
  const auto p = detail::shared_valid(pred, gt);
  std::vector<double> g(p.gt.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::log(p.pred[i]) - std::log(p.gt[i]);
  const double mean = pairwise_mean(g);
  std::vector<double> centered(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) centered[i] = (g[i] - mean) * (g[i] - mean);
  const double var = pairwise_mean(centered);
  return std::sqrt(var + (1.0 - lambda) * mean * mean);
}

/// Multi-scale gradient matching on the log-depth residual. Scale s keeps
/// every 2^s-th pixel; per scale the loss is mean|dR/dx| + mean|dR/dy| over
/// forward differences whose two endpoints are valid. Scales are averaged.
inline double grad_match_loss(const DepthMap& pred, const DepthMap& gt, int n_scales = 4) {
  detail::require_same_size(pred, gt);
  if (n_scales < 1) throw std::invalid_argument("grad_match: need at least one scale");
  const int need = 1 << (n_scales - 1);
  if (gt.width() < need || gt.height() < need)
    throw std::invalid_argument("grad_match: image smaller than 2^(n_scales-1)");
  (void)detail::shared_valid(pred, gt);

  const int w = gt.width();
  const int h = gt.height();
  Grid<double> residual(w, h);
  Grid<std::uint8_t> ok(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (pred.valid(x, y) && gt.valid(x, y)) {
        residual(x, y) = std::log(pred.at(x, y)) - std::log(gt.at(x, y));
        ok(x, y) = 1;
      }
    }
  }

  std::vector<double> per_scale;
  for (int s = 0; s < n_scales; ++s) {
    const int stride = 1 << s;
    std::vector<double> gx;
    std::vector<double> gy;
    for (int y = 0; y < h; y += stride) {
      for (int x = 0; x < w; x += stride) {
        if (!ok(x, y)) continue;
        if (x + stride < w && ok(x + stride, y)) gx.push_back(std::abs(residual(x + stride, y) - residual(x, y)));
        if (y + stride < h && ok(x, y + stride)) gy.push_back(std::abs(residual(x, y + stride) - residual(x, y)));
      }
    }
    per_scale.push_back(pairwise_mean(gx) + pairwise_mean(gy));
  }
  return pairwise_mean(per_scale);
}

/// SiLog + weight * GradMatching.
inline double total_loss(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg = {}) {
  return silog_loss(pred, gt, cfg.silog_lambda) + cfg.grad_weight * grad_match_loss(pred, gt, cfg.grad_scales);
}

inline MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt,
                                     const std::vector<double>& thresholds = default_thresholds(),
                                     const LossConfig& loss = {}) {
  const auto p = detail::shared_valid(pred, gt);
  const std::size_t n = p.gt.size();
  std::vector<double> abs_rel(n), sq_rel(n), sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = p.pred[i] - p.gt[i];
    abs_rel[i] = std::abs(diff) / p.gt[i];
    sq_rel[i] = diff * diff / p.gt[i];
    sq[i] = diff * diff;
  }
  MetricsReport r;
  r.n_valid = n;
  r.abs_rel = pairwise_mean(abs_rel);
  r.sq_rel = pairwise_mean(sq_rel);
  r.mse = pairwise_mean(sq);
  r.rmse = std::sqrt(r.mse);
  // max(d/d', d'/d) < k, written multiplicatively: the ratio form rounds and
  // can flip the strict boundary.
  for (double k : thresholds) {
    std::size_t inliers = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (p.pred[i] < k * p.gt[i] && p.gt[i] < k * p.pred[i]) ++inliers;
    r.delta[k] = static_cast<double>(inliers) / static_cast<double>(n);
  }
  r.silog = silog_loss(pred, gt, loss.silog_lambda);
  const int need = 1 << (loss.grad_scales - 1);
  r.grad_match = (gt.width() >= need && gt.height() >= need) ? grad_match_loss(pred, gt, loss.grad_scales) : 0.0;
  r.total_loss = r.silog + loss.grad_weight * r.grad_match;
  return r;
}

}  // namespace focuskit
