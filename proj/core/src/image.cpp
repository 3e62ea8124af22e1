#include "geofill/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "geofill/error.hpp"

namespace geofill {

Image::Image(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels < 1 || channels > 4) {
    throw PreconditionError("Image: invalid shape " + std::to_string(width) + "x" +
                            std::to_string(height) + "x" + std::to_string(channels));
  }
  data_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

Image::Image(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width < 0 || height < 0 || channels < 1 || channels > 4) {
    throw PreconditionError("Image: invalid shape");
  }
  if (data_.size() != pixel_count() * static_cast<std::size_t>(channels)) {
    throw PreconditionError("Image: data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(width) + "x" +
                            std::to_string(height) + "x" + std::to_string(channels));
  }
}

Image Image::channel(int c) const {
  Image out(width_, height_, 1);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) out.at(x, y) = at(x, y, c);
  }
  return out;
}

double Image::sample_bilinear(double x, double y, int c) const noexcept {
  const double cx = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  const int x0 = std::min(static_cast<int>(std::floor(cx)), std::max(width_ - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(cy)), std::max(height_ - 2, 0));
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double ax = cx - x0;
  const double ay = cy - y0;
  const double top = (1.0 - ax) * at(x0, y0, c) + ax * at(x1, y0, c);
  const double bottom = (1.0 - ax) * at(x0, y1, c) + ax * at(x1, y1, c);
  return (1.0 - ay) * top + ay * bottom;
}

void Image::check_finite(const char* what) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw FormatError(std::string(what) + ": non-finite value at sample " +
                        std::to_string(i));
    }
  }
}

HoleMask::HoleMask(int width, int height) : values_(width, height, 1, 1.0f) {}

HoleMask::HoleMask(Image values) : values_(std::move(values)) {
  if (values_.channels() != 1) {
    throw PreconditionError("HoleMask: expected a 1-channel image");
  }
  for (float v : values_.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw PreconditionError("HoleMask: values must lie in [0,1]");
    }
  }
}

std::size_t HoleMask::hole_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(values_.data().begin(), values_.data().end(),
                    [](float v) { return v < 0.5f; }));
}

Image premultiply_alpha(const Image& rgb, const HoleMask& mask) {
  if (rgb.width() != mask.width() || rgb.height() != mask.height()) {
    throw PreconditionError("premultiply_alpha: image and mask dimensions differ");
  }
  if (rgb.channels() != 3) {
    throw PreconditionError("premultiply_alpha: expected an RGB image");
  }
  Image out(rgb.width(), rgb.height(), 4);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const float m = mask.known(x, y);
      const float* src = rgb.pixel(x, y);
      float* dst = out.pixel(x, y);
      dst[0] = src[0] * m;
      dst[1] = src[1] * m;
      dst[2] = src[2] * m;
      dst[3] = m;
    }
  }
  return out;
}

Image to_gray(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const float* p = img.pixel(x, y);
      out.at(x, y) = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
  }
  return out;
}

}  // namespace geofill
