#include "geofill/compositor.hpp"

#include <algorithm>
#include <cmath>

#include "geofill/error.hpp"
#include "geofill/imgproc.hpp"

namespace geofill {

ColorCorrection parse_color_correction(const std::string& name) {
  if (name == "gain-bias") return ColorCorrection::kGainBias;
  if (name == "off") return ColorCorrection::kOff;
  throw PreconditionError("unknown color correction '" + name + "' (gain-bias | off)");
}

std::string to_string(ColorCorrection mode) {
  return mode == ColorCorrection::kGainBias ? "gain-bias" : "off";
}

ColorCorrectionResult color_correct(const Image& warp_rgb, const Image& target,
                                    const HoleMask& known, const Image& alpha) {
  if (warp_rgb.channels() != 3 || target.channels() != 3 || !warp_rgb.same_dims(target) ||
      !alpha.same_dims(target) || known.width() != target.width() ||
      known.height() != target.height()) {
    throw PreconditionError("color_correct: rasters must share dimensions (RGB warp/target)");
  }
  ColorCorrectionResult res;
  res.image = warp_rgb;
  std::array<double, 3> sw{}, st{}, sww{}, swt{};
  const int w = target.width(), h = target.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (known.is_hole(x, y) || alpha.at(x, y, alpha.channels() - 1) < 1.0f) continue;
      ++res.overlap;
      for (int c = 0; c < 3; ++c) {
        const double a = warp_rgb.at(x, y, c), b = target.at(x, y, c);
        sw[c] += a;
        st[c] += b;
        sww[c] += a * a;
        swt[c] += a * b;
      }
    }
  }
  if (res.overlap < kMinColorOverlap) return res;
  const double n = static_cast<double>(res.overlap);
  for (int c = 0; c < 3; ++c) {
    const double mw = sw[c] / n, mt = st[c] / n;
    const double var = sww[c] / n - mw * mw;
    if (var < 1e-12) {
      res.gain[c] = 1.0;
      res.bias[c] = mt - mw;
      res.offset_only[c] = true;
    } else {
      res.gain[c] = (swt[c] / n - mw * mt) / var;
      res.bias[c] = mt - res.gain[c] * mw;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = res.gain[c] * warp_rgb.at(x, y, c) + res.bias[c];
        res.image.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  res.applied = true;
  return res;
}

Image feather_alpha(const Image& alpha, double radius) {
  if (alpha.channels() != 1) throw PreconditionError("feather_alpha: expects 1-channel alpha");
  if (radius < 0.0) throw PreconditionError("feather radius must be >= 0");
  if (radius == 0.0) return alpha;
  BinaryMap empty(alpha.width(), alpha.height());
  for (int y = 0; y < alpha.height(); ++y) {
    for (int x = 0; x < alpha.width(); ++x) empty.at(x, y) = alpha.at(x, y) <= 0.0f ? 1 : 0;
  }
  const Image dist = euclidean_distance(empty);
  Image out(alpha.width(), alpha.height(), 1);
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    const double ramp = std::min(1.0, static_cast<double>(dist.data()[i]) / radius);
    out.data()[i] = static_cast<float>(alpha.data()[i] * ramp);
  }
  return out;
}

CompositeResult compose(const Image& target, const HoleMask& mask, const Image& warp_rgba,
                        const Image* fallback, const CompositeConfig& cfg) {
  if (target.channels() != 3 || warp_rgba.channels() != 4 || !target.same_dims(warp_rgba) ||
      mask.width() != target.width() || mask.height() != target.height() ||
      (fallback && !fallback->same_shape(target))) {
    throw PreconditionError("compose: target, mask, warp and fallback must share dimensions");
  }
  CompositeResult res;
  res.image = target;
  res.blend = feather_alpha(warp_rgba.channel(3), cfg.feather_radius);
  const int w = target.width(), h = target.height();
  double fallback_sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.is_hole(x, y)) continue;
      ++res.hole_pixels;
      if (warp_rgba.at(x, y, 3) <= 0.0f) ++res.uncovered_hole_pixels;
      fallback_sum += 1.0 - res.blend.at(x, y);
    }
  }
  res.fallback_fraction = res.hole_pixels ? fallback_sum / static_cast<double>(res.hole_pixels) : 0.0;
  if (!fallback) {
    if (res.uncovered_hole_pixels > 0) {
      throw PreconditionError("compose: " + std::to_string(res.uncovered_hole_pixels) +
                              " hole pixels have no rendered content and no fallback was given");
    }
    // Nothing to feather toward: the render alone fills the hole.
    res.blend = warp_rgba.channel(3);
    res.fallback_fraction = 0.0;
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.is_hole(x, y)) continue;
      const float m = res.blend.at(x, y);
      for (int c = 0; c < 3; ++c) {
        const float f = fallback ? fallback->at(x, y, c) : 0.0f;
        res.image.at(x, y, c) = m * warp_rgba.at(x, y, c) + (1.0f - m) * f;
      }
    }
  }
  return res;
}

}  // namespace geofill
