#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace geofill {

/// Row-major, channel-interleaved float raster. Color data lives in [0,1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f);
  Image(int width, int height, int channels, std::vector<float> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int x, int y, int c = 0) noexcept {
    return data_[index(x, y, c)];
  }
  float at(int x, int y, int c = 0) const noexcept {
    return data_[index(x, y, c)];
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  float* pixel(int x, int y) noexcept { return data_.data() + index(x, y, 0); }
  const float* pixel(int x, int y) const noexcept {
    return data_.data() + index(x, y, 0);
  }

  bool same_dims(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool same_shape(const Image& other) const noexcept {
    return same_dims(other) && channels_ == other.channels_;
  }

  /// Copies a single channel into a new 1-channel image.
  Image channel(int c) const;

  /// Bilinear lookup with clamp-to-edge. Coordinates are pixel centers.
  double sample_bilinear(double x, double y, int c = 0) const noexcept;

  /// Throws if any sample is NaN or infinite.
  void check_finite(const char* what) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Known-region mask: 1 = known target pixel, 0 = hole. Coarser pyramid
/// levels may carry fractional values.
class HoleMask {
 public:
  HoleMask() = default;
  /// All-known mask.
  HoleMask(int width, int height);
  explicit HoleMask(Image values);

  int width() const noexcept { return values_.width(); }
  int height() const noexcept { return values_.height(); }
  float known(int x, int y) const noexcept { return values_.at(x, y); }
  bool is_hole(int x, int y) const noexcept { return values_.at(x, y) < 0.5f; }
  void set(int x, int y, float v) noexcept { values_.at(x, y) = v; }

  std::size_t hole_count() const noexcept;
  bool has_hole() const noexcept { return hole_count() > 0; }
  const Image& values() const noexcept { return values_; }

  friend bool operator==(const HoleMask&, const HoleMask&) = default;

 private:
  Image values_;
};

/// (r·m, g·m, b·m, m) per pixel.
Image premultiply_alpha(const Image& rgb, const HoleMask& mask);

/// Luminance (Rec. 601 weights) of an RGB image, or a copy of a 1-channel one.
Image to_gray(const Image& img);

}  // namespace geofill
