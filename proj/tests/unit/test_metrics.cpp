#include <gtest/gtest.h>

#include <cmath>

#include "focuskit/metrics.hpp"
#include "oracles/metrics_oracle.hpp"
#include "oracles/scenes.hpp"

using namespace focuskit;

namespace {

DepthMap scaled(const DepthMap& d, double s) {
  DepthMap out(d.width(), d.height());
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x)
      if (d.valid(x, y)) out.set(x, y, s * d.at(x, y));
  return out;
}

DepthMap noisy(const DepthMap& d, double sigma, std::uint64_t seed) {
  SeededRng rng(seed);
  DepthMap out(d.width(), d.height());
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x)
      if (d.valid(x, y)) out.set(x, y, d.at(x, y) * std::exp(sigma * rng.normal()));
  return out;
}

/// Embeds d in a larger map with an invalid border of `pad` pixels.
DepthMap padded(const DepthMap& d, int pad) {
  DepthMap out(d.width() + 2 * pad, d.height() + 2 * pad);
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x)
      if (d.valid(x, y)) out.set(x + pad, y + pad, d.at(x, y));
  return out;
}

}  // namespace

TEST(Metrics, PerfectPrediction) {
  const auto gt = scenes::smooth_random_depth(16, 16, 1.0, 5.0, 1);
  const auto r = compute_metrics(gt, gt);
  EXPECT_EQ(r.abs_rel, 0.0);
  EXPECT_EQ(r.sq_rel, 0.0);
  EXPECT_EQ(r.mse, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  for (const auto& [k, v] : r.delta) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(r.silog, 0.0);
  EXPECT_EQ(r.grad_match, 0.0);
  EXPECT_EQ(r.total_loss, 0.0);
  EXPECT_EQ(r.n_valid, 256u);
}

TEST(Metrics, ConstantRatioTwenty) {
  const auto gt = scenes::smooth_random_depth(16, 16, 1.0, 5.0, 2);
  const auto r = compute_metrics(scaled(gt, 1.2), gt);
  EXPECT_NEAR(r.abs_rel, 0.2, 1e-12);
  EXPECT_EQ(r.delta.at(1.25), 1.0);
  EXPECT_EQ(r.delta.at(1.15), 0.0);
  EXPECT_EQ(r.delta.at(1.05), 0.0);
}

TEST(Metrics, StrictDeltaBoundary) {
  const auto gt = scenes::smooth_random_depth(32, 32, 0.5, 20.0, 3);
  EXPECT_EQ(compute_metrics(scaled(gt, 1.25), gt).delta.at(1.25), 0.0);
  // and the symmetric side: gt = 1.25 * pred
  EXPECT_EQ(compute_metrics(gt, scaled(gt, 1.25)).delta.at(1.25), 0.0);
}

TEST(Metrics, MatchesLongDoubleOracle) {
  const auto gt = scenes::smooth_random_depth(40, 36, 0.7, 9.0, 4);
  auto pred = noisy(gt, 0.15, 5);
  SeededRng rng(6);
  for (int i = 0; i < 200; ++i) pred.invalidate(static_cast<int>(rng.index(40)), static_cast<int>(rng.index(36)));
  const std::vector<double> ks{1.05, 1.1, 1.25, 1.5625};
  const auto r = compute_metrics(pred, gt, ks);
  const auto o = oracle::metrics(pred, gt, ks, 0.5L, 4);
  EXPECT_NEAR(r.abs_rel, static_cast<double>(o.abs_rel), 1e-12);
  EXPECT_NEAR(r.sq_rel, static_cast<double>(o.sq_rel), 1e-12);
  EXPECT_NEAR(r.mse, static_cast<double>(o.mse), 1e-12);
  EXPECT_NEAR(r.rmse, std::sqrt(static_cast<double>(o.mse)), 1e-12);
  EXPECT_NEAR(r.silog, static_cast<double>(o.silog), 1e-12);
  EXPECT_NEAR(r.grad_match, static_cast<double>(o.grad), 1e-12);
  for (double k : ks) EXPECT_NEAR(r.delta.at(k), static_cast<double>(o.delta.at(k)), 1e-15);
}

TEST(Metrics, DeltaMonotoneAndSymmetric) {
  const auto gt = scenes::smooth_random_depth(30, 30, 1.0, 4.0, 7);
  const auto pred = noisy(gt, 0.2, 8);
  const std::vector<double> ks{1.01, 1.05, 1.15, 1.25, 1.5, 2.0};
  const auto a = compute_metrics(pred, gt, ks);
  const auto b = compute_metrics(gt, pred, ks);
  double prev = 0.0;
  for (double k : ks) {
    EXPECT_GE(a.delta.at(k), prev);
    EXPECT_GE(a.delta.at(k), 0.0);
    EXPECT_LE(a.delta.at(k), 1.0);
    EXPECT_EQ(a.delta.at(k), b.delta.at(k));
    prev = a.delta.at(k);
  }
}

TEST(Metrics, JointRescaling) {
  const auto gt = scenes::smooth_random_depth(24, 24, 1.0, 4.0, 9);
  const auto pred = noisy(gt, 0.1, 10);
  const double s = 3.7;
  const auto a = compute_metrics(pred, gt);
  const auto b = compute_metrics(scaled(pred, s), scaled(gt, s));
  EXPECT_NEAR(b.abs_rel, a.abs_rel, 1e-12);
  EXPECT_NEAR(b.sq_rel, s * a.sq_rel, 1e-12);
  EXPECT_NEAR(b.mse, s * s * a.mse, 1e-12 * s * s);
  EXPECT_NEAR(b.rmse, s * a.rmse, 1e-12 * s);
  for (const auto& [k, v] : a.delta) EXPECT_EQ(b.delta.at(k), v);
}

TEST(Metrics, InvalidPixelsNeverMatter) {
  const auto gt = scenes::smooth_random_depth(24, 20, 1.0, 4.0, 11);
  const auto pred = noisy(gt, 0.1, 12);
  const auto a = compute_metrics(pred, gt);
  // Pad by a multiple of the coarsest stride so the dyadic grids line up.
  auto pp = padded(pred, 8);
  auto pg = padded(gt, 8);
  // invalid in one map only, with garbage values in the other
  for (int x = 0; x < pp.width(); ++x) pp.set(x, 0, 100.0);
  for (int x = 0; x < pg.width(); ++x) pg.set(x, 1, 0.001);
  const auto b = compute_metrics(pp, pg);
  EXPECT_EQ(a.abs_rel, b.abs_rel);
  EXPECT_EQ(a.sq_rel, b.sq_rel);
  EXPECT_EQ(a.mse, b.mse);
  EXPECT_EQ(a.rmse, b.rmse);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_EQ(a.silog, b.silog);
  EXPECT_EQ(a.grad_match, b.grad_match);
  EXPECT_EQ(a.total_loss, b.total_loss);
  EXPECT_EQ(a.n_valid, b.n_valid);
}

TEST(Metrics, Errors) {
  DepthMap empty(4, 4);
  DepthMap full(4, 4, 1.0);
  EXPECT_THROW(compute_metrics(empty, full), std::invalid_argument);
  EXPECT_THROW(compute_metrics(full, DepthMap(5, 4, 1.0)), std::invalid_argument);
  EXPECT_THROW(silog_loss(full, full, 1.5), std::invalid_argument);
  EXPECT_THROW(grad_match_loss(DepthMap(4, 4, 1.0), DepthMap(4, 4, 1.0), 4), std::invalid_argument);
}

TEST(Silog, Examples) {
  const auto gt = scenes::smooth_random_depth(8, 8, 1.0, 4.0, 13);
  EXPECT_EQ(silog_loss(gt, gt), 0.0);
  EXPECT_LE(silog_loss(scaled(gt, 2.5), gt, 1.0), 1e-12);

  DepthMap g(2, 1, 1.0);
  DepthMap p(2, 1);
  p.set(0, 0, 1.0);
  p.set(1, 0, 2.0);
  const double ln2 = std::log(2.0);
  // mean(g^2) = ln2^2 / 2, mean(g) = ln2 / 2
  EXPECT_NEAR(silog_loss(p, g, 0.5), std::sqrt(ln2 * ln2 / 2 - 0.5 * ln2 * ln2 / 4), 1e-15);
  EXPECT_NEAR(silog_loss(p, g, 0.5), 0.4244642, 1e-7);
}

TEST(Silog, ScaleInvarianceAtLambdaOne) {
  const auto gt = scenes::smooth_random_depth(32, 32, 0.5, 8.0, 14);
  const auto pred = noisy(gt, 0.3, 15);
  const double base = silog_loss(pred, gt, 1.0);
  for (double s : {0.01, 0.5, 2.0, 3.3, 1e3}) EXPECT_NEAR(silog_loss(scaled(pred, s), gt, 1.0), base, 1e-12);
}

TEST(GradMatch, Examples) {
  const auto gt = scenes::smooth_random_depth(16, 16, 1.0, 4.0, 16);
  EXPECT_EQ(grad_match_loss(gt, gt), 0.0);
  EXPECT_LE(grad_match_loss(scaled(gt, 1.7), gt), 1e-15);

  // R = [[0, 1], [0, 1]] at a single scale.
  DepthMap g(2, 2, 1.0);
  DepthMap p(2, 2);
  p.set(0, 0, 1.0);
  p.set(1, 0, std::exp(1.0));
  p.set(0, 1, 1.0);
  p.set(1, 1, std::exp(1.0));
  EXPECT_NEAR(grad_match_loss(p, g, 1), 1.0, 1e-15);
}

TEST(TotalLoss, ComposesComponents) {
  const auto gt = scenes::smooth_random_depth(32, 32, 0.8, 6.0, 17);
  const auto pred = noisy(gt, 0.2, 18);
  const LossConfig cfg;
  const double want = silog_loss(pred, gt, cfg.silog_lambda) + 0.1 * grad_match_loss(pred, gt, cfg.grad_scales);
  EXPECT_NEAR(total_loss(pred, gt, cfg), want, 1e-12);
  const auto r = compute_metrics(pred, gt);
  EXPECT_NEAR(r.total_loss, r.silog + 0.1 * r.grad_match, 1e-12);
  EXPECT_EQ(total_loss(gt, gt), 0.0);
}
