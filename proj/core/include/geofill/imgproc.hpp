#pragma once

#include <cstdint>
#include <vector>

#include "geofill/image.hpp"

namespace geofill {

/// Binary raster, row-major, 0 or 1 per pixel.
struct BinaryMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMap() = default;
  BinaryMap(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}
  std::uint8_t& at(int x, int y) noexcept { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const noexcept {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t count() const noexcept;
};

/// Exact Euclidean distance from every pixel to the nearest set pixel of
/// `seeds` (separable lower-envelope transform). Returns +inf everywhere when
/// no seed is set.
Image euclidean_distance(const BinaryMap& seeds);

/// Separable Gaussian blur, radius ceil(3 sigma), reflect-101 borders.
/// sigma <= 0 returns a copy.
Image gaussian_blur(const Image& img, double sigma);

/// Gaussian blur of `img` restricted to pixels with weight > 0:
/// blur(img * w) / blur(w), zero where blur(w) vanishes.
Image normalized_blur(const Image& img, const Image& weight, double sigma);

/// Square dilation; kernel side `size` spans offsets -size/2 .. (size-1)/2.
BinaryMap dilate_square(const BinaryMap& in, int size);

struct CannyResult {
  BinaryMap edges;
  double low_threshold = 0.0;
  double high_threshold = 0.0;
};

/// Canny on a 1-channel image: Sobel gradients, 4-direction non-maximum
/// suppression, 8-connected hysteresis. Thresholds are the given percentiles
/// of the gradient magnitude over pixels where `region` is set (all pixels
/// when empty), floored at `min_magnitude`.
CannyResult canny(const Image& gray, double low_percentile, double high_percentile,
                  const BinaryMap& region = {}, double min_magnitude = 1e-6);

/// Nearest-rank percentile (0..100) of the values; values must be nonempty.
double percentile(std::vector<double> values, double pct);

}  // namespace geofill
