#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "focuskit/dfo.hpp"
#include "oracles/roundtrip.hpp"
#include "oracles/scenes.hpp"

using namespace focuskit;

namespace {

FocusStack stack_of(std::vector<RgbImage> images, std::vector<double> fds) {
  FocusStack s;
  s.images = std::move(images);
  s.focus_distances_m = std::move(fds);
  s.lens = ThinLensConfig::make(0.05, 2.8, 1e-4);
  return s;
}

RgbImage gray(const std::vector<std::vector<float>>& rows) {
  RgbImage im(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < im.height(); ++y)
    for (int x = 0; x < im.width(); ++x)
      for (int c = 0; c < 3; ++c) im(x, y, c) = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
  return im;
}

}  // namespace

TEST(FocusMeasure, ConstantImageIsZero) {
  const auto fm = focus_measure(stack_of({RgbImage(9, 9, 0.4f)}, {1.0}), 2);
  for (double v : fm.scores[0].data()) EXPECT_EQ(v, 0.0);
}

TEST(FocusMeasure, ImpulsePeaksAtImpulse) {
  RgbImage im(15, 15, 0.0f);
  for (int c = 0; c < 3; ++c) im(7, 6, c) = 1.0f;
  const auto ml = modified_laplacian(im);
  int bx = 0;
  int by = 0;
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x)
      if (ml(x, y) > ml(bx, by)) bx = x, by = y;
  EXPECT_EQ(bx, 7);
  EXPECT_EQ(by, 6);
  EXPECT_NEAR(ml(7, 6), 4.0, 1e-6);
}

TEST(FocusMeasure, HandComputedThreeByThree) {
  // Luminance equals the gray value. Borders clamp.
  const auto im = gray({{0.0f, 0.5f, 0.0f}, {0.5f, 1.0f, 0.5f}, {0.0f, 0.5f, 0.0f}});
  const auto ml = modified_laplacian(im);
  // center: |2 - .5 - .5| + |2 - .5 - .5| = 2
  EXPECT_NEAR(ml(1, 1), 2.0, 1e-6);
  // (0,0): left clamps to itself: |0 - 0 - .5| + |0 - 0 - .5| = 1
  EXPECT_NEAR(ml(0, 0), 1.0, 1e-6);
  // (1,0): |1 - 0 - 0| + |1 - .5 - 1| = 1.5
  EXPECT_NEAR(ml(1, 0), 1.5, 1e-6);
  // window radius 1 at the center covers all nine cells
  const auto fm = focus_measure(stack_of({im}, {1.0}), 1);
  double total = 0.0;
  for (double v : ml.data()) total += v;
  EXPECT_NEAR(fm.scores[0](1, 1), total, 1e-9);
  // ml(0,0)=ml(2,0)=ml(0,2)=ml(2,2)=1, edges 1.5, center 2 => 4 + 6 + 2 = 12
  EXPECT_NEAR(total, 12.0, 1e-6);
}

TEST(FocusMeasure, Errors) {
  EXPECT_THROW(focus_measure(stack_of({RgbImage(4, 4)}, {1.0}), 0), std::invalid_argument);
  EXPECT_THROW(focus_measure(stack_of({RgbImage(4, 4), RgbImage(5, 4)}, {1.0, 2.0}), 1), std::invalid_argument);
}

TEST(Parabola, RecoversVertex) {
  auto f = [](double x) { return -3.0 * (x - 0.7) * (x - 0.7) + 2.0; };
  EXPECT_NEAR(parabola_vertex(0.0, f(0.0), 0.5, f(0.5), 1.5, f(1.5)), 0.7, 1e-12);
  EXPECT_EQ(parabola_vertex(0.0, 0.0, 1.0, 1.0, 2.0, 2.0), 1.0);  // not concave
}

TEST(EstimateDepth, TexturelessIsInvalid) {
  const auto est = estimate_depth(stack_of({RgbImage(8, 8, 0.5f), RgbImage(8, 8, 0.5f)}, {1.0, 2.0}));
  EXPECT_EQ(est.valid_count(), 0u);
}

TEST(EstimateDepth, Errors) {
  EXPECT_THROW(estimate_depth(stack_of({RgbImage(8, 8)}, {1.0})), std::invalid_argument);
  EXPECT_THROW(estimate_depth(stack_of({RgbImage(8, 8), RgbImage(8, 8)}, {1.0, 1.0})), std::invalid_argument);
}

TEST(EstimateDepth, PlaneAtThirdFocusDistance) {
  const std::vector<double> fds{1.0, 1.4, 2.0, 3.0, 5.0};
  const auto rgb = scenes::noise_texture(48, 48, 7);
  const auto lens = ThinLensConfig::make(0.05, 2.8, 1e-4);
  const auto stack = synthesize_stack(rgb, DepthMap(48, 48, 2.0), lens, fds, 2.0);
  for (bool refine : {false, true}) {
    DfoOptions o;
    o.refine = refine;
    const auto est = estimate_depth(stack, o);
    EXPECT_EQ(est.valid_count(), est.pixel_count());
    for (double v : est.valid_values()) EXPECT_NEAR(v, 2.0, refine ? 0.1 : 0.0);
  }
}

TEST(EstimateDepth, WithinFocusRangeAndPermutationInvariant) {
  const auto rgb = scenes::noise_texture(40, 40, 17);
  const auto depth = scenes::smooth_random_depth(40, 40, 0.8, 6.0, 18);
  const auto lens = ThinLensConfig::make(0.05, 2.8, 1e-4);
  const std::vector<double> fds{1.0, 1.5, 2.2, 3.5, 5.0};
  const auto stack = synthesize_stack(rgb, depth, lens, fds, 4.0);
  const auto est = estimate_depth(stack);
  for (double v : est.valid_values()) {
    EXPECT_GE(v, 1.0);
    EXPECT_LE(v, 5.0);
  }
  FocusStack perm = stack;
  const std::vector<std::size_t> order{3, 0, 4, 2, 1};
  for (std::size_t i = 0; i < order.size(); ++i) {
    perm.images[i] = stack.images[order[i]];
    perm.focus_distances_m[i] = stack.focus_distances_m[order[i]];
  }
  EXPECT_EQ(estimate_depth(perm), est);
}

TEST(RoundTrip, TwoPlanesSmall) {
  const auto r = roundtrip::run(64, 2.0, SynthesisMode::reference, 5);
  EXPECT_LE(r.median_abs_rel, 0.05);
  EXPECT_GE(r.label_agreement, 0.95);
}

TEST(RoundTrip, RefinementAxes) {
  // CoC is linear in disparity, so the disparity fit is the unbiased one;
  // the log-disparity fit stays within the label criterion.
  DfoOptions o;
  o.refine_axis = RefineAxis::log_disparity;
  const auto log_fit = roundtrip::run(64, 2.0, SynthesisMode::reference, 5, o);
  const auto disp_fit = roundtrip::run(64, 2.0, SynthesisMode::reference, 5);
  EXPECT_LT(disp_fit.median_abs_rel, log_fit.median_abs_rel);
  EXPECT_GE(log_fit.label_agreement, 0.95);
}
