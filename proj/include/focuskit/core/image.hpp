#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace focuskit {

/// Row-major 2D array with a fixed channel count.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1) {
      throw std::invalid_argument("Grid: invalid dimensions");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  T& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  /// Clamp-to-edge read.
  const T& clamped(int x, int y, int c = 0) const {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return data_[index(x, y, c)];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

/// 3-channel image with values in [0, 1].
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, float fill = 0.0f) : pixels_(width, height, 3, fill) {
    if (width < 1 || height < 1) throw std::invalid_argument("RgbImage: empty image");
    if (fill < 0.0f || fill > 1.0f) throw std::invalid_argument("RgbImage: fill outside [0,1]");
  }

  int width() const { return pixels_.width(); }
  int height() const { return pixels_.height(); }

  float& operator()(int x, int y, int c) { return pixels_(x, y, c); }
  float operator()(int x, int y, int c) const { return pixels_(x, y, c); }
  float clamped(int x, int y, int c) const { return pixels_.clamped(x, y, c); }

  /// Rec.601 luma.
  double luminance(int x, int y) const {
    return 0.299 * pixels_(x, y, 0) + 0.587 * pixels_(x, y, 1) + 0.114 * pixels_(x, y, 2);
  }

  Grid<float>& pixels() { return pixels_; }
  const Grid<float>& pixels() const { return pixels_; }

  bool same_size(int w, int h) const { return width() == w && height() == h; }

  friend bool operator==(const RgbImage& a, const RgbImage& b) { return a.pixels_ == b.pixels_; }

 private:
  Grid<float> pixels_;
};

/// Dense metric depth with a validity mask. Valid entries are finite and > 0.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height)
      : depth_(width, height, 1, 0.0), valid_(width, height, 1, std::uint8_t{0}) {
    if (width < 1 || height < 1) throw std::invalid_argument("DepthMap: empty map");
  }
  DepthMap(int width, int height, double value) : DepthMap(width, height) {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) set(x, y, value);
  }

  int width() const { return depth_.width(); }
  int height() const { return depth_.height(); }
  std::size_t pixel_count() const { return depth_.pixel_count(); }

  bool valid(int x, int y) const { return valid_(x, y) != 0; }
  double at(int x, int y) const { return depth_(x, y); }
  double clamped(int x, int y) const { return depth_.clamped(x, y); }

  void set(int x, int y, double meters) {
    if (!std::isfinite(meters) || meters <= 0.0) {
      throw std::domain_error("DepthMap: valid depth must be finite and positive");
    }
    depth_(x, y) = meters;
    valid_(x, y) = 1;
  }
  void invalidate(int x, int y) {
    depth_(x, y) = 0.0;
    valid_(x, y) = 0;
  }

  std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count(valid_.data().begin(), valid_.data().end(), 1));
  }
  bool fully_valid() const { return valid_count() == pixel_count(); }

  std::vector<double> valid_values() const {
    std::vector<double> out;
    out.reserve(valid_count());
    for (std::size_t i = 0; i < depth_.data().size(); ++i)
      if (valid_.data()[i]) out.push_back(depth_.data()[i]);
    return out;
  }

  const Grid<double>& depth() const { return depth_; }
  const Grid<std::uint8_t>& mask() const { return valid_; }

  bool same_size(int w, int h) const { return width() == w && height() == h; }

  friend bool operator==(const DepthMap& a, const DepthMap& b) {
    return a.valid_ == b.valid_ && a.depth_ == b.depth_;
  }

 private:
  Grid<double> depth_;
  Grid<std::uint8_t> valid_;
};

}  // namespace focuskit
