#include "geofill/pyramid.hpp"

#include <string>

#include "geofill/error.hpp"

namespace geofill {

namespace {

constexpr float kTaps[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};

}  // namespace

int reflect101(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Image binomial_blur(const Image& img) {
  const int w = img.width(), h = img.height(), ch = img.channels();
  Image tmp(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        float acc = 0.0f;
        for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * img.at(reflect101(x + k, w), y, c);
        tmp.at(x, y, c) = acc;
      }
    }
  }
  Image out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        float acc = 0.0f;
        for (int k = -2; k <= 2; ++k) acc += kTaps[k + 2] * tmp.at(x, reflect101(y + k, h), c);
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

Image pyr_down(const Image& img) {
  const Image blurred = binomial_blur(img);
  const int w = (img.width() + 1) / 2, h = (img.height() + 1) / 2, ch = img.channels();
  Image out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float* src = blurred.pixel(2 * x, 2 * y);
      float* dst = out.pixel(x, y);
      for (int c = 0; c < ch; ++c) dst[c] = src[c];
    }
  }
  return out;
}

GaussianPyramid build_pyramid(const Image& img, int levels) {
  if (levels < 1) throw PreconditionError("build_pyramid: levels must be >= 1");
  if (img.empty()) throw PreconditionError("build_pyramid: empty image");
  GaussianPyramid pyr;
  pyr.levels.reserve(static_cast<std::size_t>(levels));
  pyr.levels.push_back(img);
  for (int l = 1; l < levels; ++l) {
    const Image& prev = pyr.levels.back();
    if (prev.width() == 1 && prev.height() == 1) {
      throw PreconditionError("build_pyramid: " + std::to_string(levels) +
                              " levels too deep for a " + std::to_string(img.width()) + "x" +
                              std::to_string(img.height()) + " image");
    }
    pyr.levels.push_back(pyr_down(prev));
  }
  return pyr;
}

}  // namespace geofill
