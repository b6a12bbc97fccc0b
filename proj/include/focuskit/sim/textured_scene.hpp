#pragma once

// Demo inputs for the image pipeline: a high-frequency random texture over
// two fronto-parallel planes (a near square on a far background).

#include <cstdint>
#include <stdexcept>

#include "focuskit/core/image.hpp"
#include "focuskit/random.hpp"

namespace focuskit::sim {

struct TwoPlaneScene {
  RgbImage rgb;
  DepthMap depth;
};

inline TwoPlaneScene two_plane_scene(int width, int height, double near_m, double far_m, std::uint64_t seed) {
  if (width < 4 || height < 4) throw std::invalid_argument("scene: image must be at least 4x4");
  if (!(near_m > 0.0 && near_m < far_m)) throw std::invalid_argument("scene: need 0 < near < far");
  SeededRng rng(seed);
  TwoPlaneScene s{RgbImage(width, height), DepthMap(width, height)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) s.rgb(x, y, c) = static_cast<float>(rng.uniform(0.05, 0.95));
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const bool inner = x >= width / 4 && x < 3 * width / 4 && y >= height / 4 && y < 3 * height / 4;
      s.depth.set(x, y, inner ? near_m : far_m);
    }
  return s;
}

}  // namespace focuskit::sim
