#pragma once

// Focus-stack synthesis from RGB + dense depth with a per-pixel PSF.
//
// Reference semantics (scatter-normalized gather): every source pixel s owns
// the kernel K_s built from its own CoC, and
//
//   out(q) = sum_s K_s(q - s) rgb(s) / sum_s K_s(q - s).
//
// Sources outside the image take the color and depth of the nearest edge
// pixel (clamp-to-edge).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "focuskit/core/image.hpp"
#include "focuskit/core/parallel.hpp"
#include "focuskit/optics.hpp"

namespace focuskit {

struct FocusStack {
  std::vector<RgbImage> images;
  std::vector<double> focus_distances_m;
  ThinLensConfig lens;

  std::size_t size() const { return images.size(); }

  void validate() const {
    if (images.empty()) throw std::invalid_argument("focus stack: empty");
    if (images.size() != focus_distances_m.size())
      throw std::invalid_argument("focus stack: image and focus-distance counts differ");
    for (const auto& im : images)
      if (!im.same_size(images.front().width(), images.front().height()))
        throw std::invalid_argument("focus stack: images differ in size");
    for (double d : focus_distances_m)
      if (!(d > 0.0)) throw std::invalid_argument("focus stack: focus distances must be > 0");
  }
};

enum class SynthesisMode { reference, layered };

inline std::string to_string(SynthesisMode m) {
  return m == SynthesisMode::reference ? "reference" : "layered";
}

inline SynthesisMode parse_synthesis_mode(const std::string& s) {
  if (s == "reference") return SynthesisMode::reference;
  if (s == "layered") return SynthesisMode::layered;
  throw std::invalid_argument("unknown synthesis mode: " + s);
}

/// Fills invalid pixels by repeated one-ring dilation from valid neighbors
/// (4-neighbors before diagonals, smaller depth on ties), then replaces each
/// filled pixel with the median of its 3x3 neighborhood.
inline DepthMap fill_depth_holes(const DepthMap& depth) {
  if (depth.valid_count() == 0) throw std::invalid_argument("fill_depth_holes: no valid pixels");
  if (depth.fully_valid()) return depth;

  const int w = depth.width();
  const int h = depth.height();
  Grid<double> value = depth.depth();
  Grid<std::uint8_t> known = depth.mask();
  std::size_t remaining = depth.pixel_count() - depth.valid_count();

  while (remaining > 0) {
    Grid<double> next_value = value;
    Grid<std::uint8_t> next_known = known;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (known(x, y)) continue;
        int best_dist = std::numeric_limits<int>::max();
        double best = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h || !known(nx, ny)) continue;
            const int dist = dx * dx + dy * dy;
            const double v = value(nx, ny);
            if (dist < best_dist || (dist == best_dist && v < best)) {
              best_dist = dist;
              best = v;
            }
          }
        }
        if (best_dist != std::numeric_limits<int>::max()) {
          next_value(x, y) = best;
          next_known(x, y) = 1;
          --remaining;
        }
      }
    }
    value = std::move(next_value);
    known = std::move(next_known);
  }

  DepthMap out = depth;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (depth.valid(x, y)) continue;
      double window[9];
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) window[n++] = value.clamped(x + dx, y + dy);
      std::nth_element(window, window + 4, window + 9);
      out.set(x, y, window[4]);
    }
  }
  return out;
}

namespace detail {

inline void require_synthesis_inputs(const RgbImage& rgb, const DepthMap& depth) {
  if (!depth.same_size(rgb.width(), rgb.height()))
    throw std::invalid_argument("synthesis: depth and image dimensions differ");
  if (!depth.fully_valid())
    throw std::invalid_argument("synthesis: depth has holes (run fill_depth_holes first)");
}

inline Grid<double> coc_pixel_map(const DepthMap& depth, const ThinLensConfig& lens, double focus_m) {
  Grid<double> coc(depth.width(), depth.height());
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) coc(x, y) = coc_pixels(depth.at(x, y), lens, focus_m);
  return coc;
}

/// Kernels for each distinct CoC scale. Falls back to evaluating weights on
/// demand when the tables would exceed the memory budget; both routes
/// compute psf / sum with the same operations, so they agree bit-for-bit.
class KernelBank {
 public:
  static constexpr std::size_t kTableBudget = std::size_t{1} << 24;

  KernelBank(const Grid<double>& coc, double shape_p, double cutoff_rel)
      : owner_(coc.width(), coc.height(), 1, 0) {
    std::map<double, int> ids;
    for (int y = 0; y < coc.height(); ++y) {
      for (int x = 0; x < coc.width(); ++x) {
        auto [it, inserted] = ids.try_emplace(coc(x, y), static_cast<int>(entries_.size()));
        if (inserted) entries_.push_back(make_entry(PsfSpec{shape_p, coc(x, y), cutoff_rel}));
        owner_(x, y) = it->second;
      }
    }
    std::size_t total = 0;
    for (const auto& e : entries_) total += static_cast<std::size_t>(2 * e.radius + 1) * (2 * e.radius + 1);
    tabulated_ = total <= kTableBudget;
    if (tabulated_)
      for (auto& e : entries_) e.table = make_kernel(e.spec).weights;
    for (const auto& e : entries_) max_radius_ = std::max(max_radius_, e.radius);
  }

  int max_radius() const { return max_radius_; }
  int owner(int x, int y) const { return owner_.clamped(x, y); }
  int radius(int id) const { return entries_[static_cast<std::size_t>(id)].radius; }

  double weight(int id, int du, int dv) const {
    const Entry& e = entries_[static_cast<std::size_t>(id)];
    if (e.radius == 0) return 1.0;
    if (tabulated_) {
      const int n = 2 * e.radius + 1;
      return e.table[static_cast<std::size_t>(dv + e.radius) * n + (du + e.radius)];
    }
    return psf_value(du, dv, e.spec) / e.sum;
  }

 private:
  struct Entry {
    PsfSpec spec;
    int radius = 0;
    double sum = 1.0;
    std::vector<double> table;
  };

  static Entry make_entry(const PsfSpec& spec) {
    spec.validate();
    Entry e{spec, 0, 1.0, {}};
    if (spec.scale_c_px < kIdentityScalePx) return e;
    e.radius = kernel_radius(spec);
    double sum = 0.0;
    for (int dv = -e.radius; dv <= e.radius; ++dv)
      for (int du = -e.radius; du <= e.radius; ++du) sum += psf_value(du, dv, spec);
    e.sum = sum;
    return e;
  }

  Grid<int> owner_;
  std::vector<Entry> entries_;
  bool tabulated_ = true;
  int max_radius_ = 0;
};

}  // namespace detail

inline RgbImage synthesize_image_reference(const RgbImage& rgb, const DepthMap& depth,
                                           const ThinLensConfig& lens, double focus_distance_m,
                                           double psf_shape_p, double cutoff_rel = kDefaultPsfCutoff) {
  detail::require_synthesis_inputs(rgb, depth);
  const auto coc = detail::coc_pixel_map(depth, lens, focus_distance_m);
  const detail::KernelBank bank(coc, psf_shape_p, cutoff_rel);
  const int w = rgb.width();
  const int h = rgb.height();
  const int reach = bank.max_radius();

  RgbImage out(w, h);
  parallel_for(0, h, [&](std::ptrdiff_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0.0, 0.0, 0.0};
      double wsum = 0.0;
      for (int sy = y - reach; sy <= y + reach; ++sy) {
        for (int sx = x - reach; sx <= x + reach; ++sx) {
          const int id = bank.owner(sx, sy);
          const int du = x - sx;
          const int dv = y - sy;
          const int r = bank.radius(id);
          if (du < -r || du > r || dv < -r || dv > r) continue;
          const double wt = bank.weight(id, du, dv);
          wsum += wt;
          for (int c = 0; c < 3; ++c) acc[c] += wt * rgb.clamped(sx, sy, c);
        }
      }
      for (int c = 0; c < 3; ++c) out(x, y, c) = static_cast<float>(acc[c] / wsum);
    }
  });
  return out;
}

/// Fast approximation: depth is binned uniformly in disparity with bin
/// centers spanning [min, max] disparity, each layer is blurred with the
/// kernel of its center depth, and layers are accumulated far-to-near as
/// premultiplied color plus blurred coverage, normalized by total coverage.
inline RgbImage synthesize_image_layered(const RgbImage& rgb, const DepthMap& depth,
                                         const ThinLensConfig& lens, double focus_distance_m,
                                         double psf_shape_p, int n_layers,
                                         double cutoff_rel = kDefaultPsfCutoff) {
  if (n_layers < 2) throw std::invalid_argument("layered synthesis: n_layers must be >= 2");
  detail::require_synthesis_inputs(rgb, depth);
  const int w = rgb.width();
  const int h = rgb.height();

  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double disp = 1.0 / depth.at(x, y);
      dmin = std::min(dmin, disp);
      dmax = std::max(dmax, disp);
    }
  }
  const bool single = !(dmax - dmin > 1e-12 * dmax);
  const double step = single ? 0.0 : (dmax - dmin) / (n_layers - 1);
  const int layers = single ? 1 : n_layers;

  Grid<int> layer_of(w, h);
  std::vector<int> x0(layers, w), x1(layers, -1), y0(layers, h), y1(layers, -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int b = 0;
      if (!single) {
        b = static_cast<int>(std::lround((1.0 / depth.at(x, y) - dmin) / step));
        b = std::clamp(b, 0, layers - 1);
      }
      layer_of(x, y) = b;
      x0[b] = std::min(x0[b], x);
      x1[b] = std::max(x1[b], x);
      y0[b] = std::min(y0[b], y);
      y1[b] = std::max(y1[b], y);
    }
  }

  Grid<double> acc(w, h, 3, 0.0);
  Grid<double> coverage(w, h, 1, 0.0);
  // Disparity grows with bin index, so ascending order is far-to-near.
  for (int b = 0; b < layers; ++b) {
    if (x1[b] < 0) continue;
    const double layer_depth = single ? depth.at(0, 0) : 1.0 / (dmin + b * step);
    const DiscreteKernel k =
        make_kernel(PsfSpec{psf_shape_p, coc_pixels(layer_depth, lens, focus_distance_m), cutoff_rel});
    const int r = k.radius_px;
    const int qx0 = std::max(0, x0[b] - r);
    const int qx1 = std::min(w - 1, x1[b] + r);
    const int qy0 = std::max(0, y0[b] - r);
    const int qy1 = std::min(h - 1, y1[b] + r);
    parallel_for(qy0, qy1 + 1, [&](std::ptrdiff_t row) {
      const int y = static_cast<int>(row);
      for (int x = qx0; x <= qx1; ++x) {
        double c3[3] = {0.0, 0.0, 0.0};
        double alpha = 0.0;
        for (int dv = -r; dv <= r; ++dv) {
          const int sy = std::clamp(y - dv, 0, h - 1);
          for (int du = -r; du <= r; ++du) {
            const int sx = std::clamp(x - du, 0, w - 1);
            if (layer_of(sx, sy) != b) continue;
            const double wt = k.at(du, dv);
            alpha += wt;
            for (int c = 0; c < 3; ++c) c3[c] += wt * rgb(sx, sy, c);
          }
        }
        for (int c = 0; c < 3; ++c) acc(x, y, c) += c3[c];
        coverage(x, y) += alpha;
      }
    });
  }

  RgbImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out(x, y, c) = static_cast<float>(acc(x, y, c) / coverage(x, y));
  return out;
}

struct SynthesisOptions {
  SynthesisMode mode = SynthesisMode::reference;
  int n_layers = 64;
  double cutoff_rel = kDefaultPsfCutoff;
};

inline RgbImage synthesize_image(const RgbImage& rgb, const DepthMap& depth, const ThinLensConfig& lens,
                                 double focus_distance_m, double psf_shape_p,
                                 const SynthesisOptions& opts = {}) {
  if (opts.mode == SynthesisMode::reference)
    return synthesize_image_reference(rgb, depth, lens, focus_distance_m, psf_shape_p, opts.cutoff_rel);
  return synthesize_image_layered(rgb, depth, lens, focus_distance_m, psf_shape_p, opts.n_layers,
                                  opts.cutoff_rel);
}

inline FocusStack synthesize_stack(const RgbImage& rgb, const DepthMap& depth, const ThinLensConfig& lens,
                                   const std::vector<double>& focus_distances_m, double psf_shape_p,
                                   const SynthesisOptions& opts = {}) {
  if (focus_distances_m.empty()) throw std::invalid_argument("synthesize_stack: no focus distances");
  if (!std::is_sorted(focus_distances_m.begin(), focus_distances_m.end()))
    throw std::invalid_argument("synthesize_stack: focus distances must be sorted ascending");
  lens.validate();
  FocusStack stack;
  stack.focus_distances_m = focus_distances_m;
  stack.lens = lens;
  stack.images.resize(focus_distances_m.size());
  for (std::size_t i = 0; i < focus_distances_m.size(); ++i)
    stack.images[i] = synthesize_image(rgb, depth, lens, focus_distances_m[i], psf_shape_p, opts);
  return stack;
}

struct ZoomResult {
  RgbImage rgb;
  DepthMap depth;
  ThinLensConfig lens;
};

/// Optical zoom by s: bilinear upscale about the image center, center-cropped
/// back to the input size. Depth is resampled by nearest neighbor so values
/// never mix across edges.
inline ZoomResult zoom_augment(const RgbImage& rgb, const DepthMap& depth, const ThinLensConfig& lens,
                               double scale_s) {
  if (!(scale_s >= 1.0 && scale_s <= 1.5)) throw std::invalid_argument("zoom_augment: scale must be in [1, 1.5]");
  if (!depth.same_size(rgb.width(), rgb.height()))
    throw std::invalid_argument("zoom_augment: depth and image dimensions differ");
  const int w = rgb.width();
  const int h = rgb.height();
  const double cx = 0.5 * w;
  const double cy = 0.5 * h;

  ZoomResult out{RgbImage(w, h), DepthMap(w, h), lens};
  for (int y = 0; y < h; ++y) {
    const double sy = cy + (y + 0.5 - cy) / scale_s - 0.5;
    const int iy = static_cast<int>(std::floor(sy));
    const double fy = sy - iy;
    const int ny = std::clamp(static_cast<int>(std::floor(sy + 0.5)), 0, h - 1);
    for (int x = 0; x < w; ++x) {
      const double sx = cx + (x + 0.5 - cx) / scale_s - 0.5;
      const int ix = static_cast<int>(std::floor(sx));
      const double fx = sx - ix;
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - fx) * rgb.clamped(ix, iy, c) + fx * rgb.clamped(ix + 1, iy, c);
        const double bottom = (1.0 - fx) * rgb.clamped(ix, iy + 1, c) + fx * rgb.clamped(ix + 1, iy + 1, c);
        out.rgb(x, y, c) = static_cast<float>((1.0 - fy) * top + fy * bottom);
      }
      const int nx = std::clamp(static_cast<int>(std::floor(sx + 0.5)), 0, w - 1);
      if (depth.valid(nx, ny)) out.depth.set(x, y, depth.at(nx, ny));
    }
  }
  out.lens.focal_length_px = lens.focal_length_px * scale_s;
  out.lens.pixel_pitch_m = lens.pixel_pitch_m / scale_s;
  out.lens.principal_point = {cx + scale_s * (lens.principal_point.x - cx),
                              cy + scale_s * (lens.principal_point.y - cy)};
  return out;
}

}  // namespace focuskit
