#pragma once

#include <vector>

#include "geofill/image.hpp"

namespace geofill {

/// Level 0 is the input; level l+1 is the [1,4,6,4,1]/16 separable blur of
/// level l (reflect-101 borders) sampled at even pixel indices.
struct GaussianPyramid {
  std::vector<Image> levels;

  int size() const noexcept { return static_cast<int>(levels.size()); }
  const Image& operator[](int level) const { return levels.at(level); }
};

GaussianPyramid build_pyramid(const Image& img, int levels);

/// One blur + decimate step.
Image pyr_down(const Image& img);

/// Separable 5-tap binomial blur without decimation.
Image binomial_blur(const Image& img);

/// Reflect-101 index folding (…2 1 | 0 1 2 … n-1 | n-2 …).
int reflect101(int i, int n) noexcept;

}  // namespace geofill
