#pragma once

#include <array>
#include <optional>
#include <string>

#include "geofill/image.hpp"

namespace geofill {

enum class ColorCorrection { kGainBias, kOff };

ColorCorrection parse_color_correction(const std::string& name);
std::string to_string(ColorCorrection mode);

struct CompositeConfig {
  double feather_radius = 8.0;
  ColorCorrection color_correction = ColorCorrection::kGainBias;
};

/// Minimum overlap (known and rendered) for a gain/bias fit.
inline constexpr std::size_t kMinColorOverlap = 64;

struct ColorCorrectionResult {
  Image image;
  std::array<double, 3> gain{1.0, 1.0, 1.0};
  std::array<double, 3> bias{0.0, 0.0, 0.0};
  std::array<bool, 3> offset_only{false, false, false};
  std::size_t overlap = 0;
  bool applied = false;
};

/// Per-channel least squares target ~ gain * warp + bias over pixels that are
/// known and fully rendered (alpha = 1), applied everywhere and clamped to
/// [0, 1]. A channel with constant warp values gets gain 1 and an offset-only
/// fit. With fewer than kMinColorOverlap overlap pixels the warp is returned
/// unchanged and `applied` is false.
ColorCorrectionResult color_correct(const Image& warp_rgb, const Image& target,
                                    const HoleMask& known, const Image& alpha);

/// alpha * min(1, d / radius) where d is the distance to the nearest
/// zero-alpha pixel. radius 0 returns alpha.
Image feather_alpha(const Image& alpha, double radius);

struct CompositeResult {
  Image image;
  Image blend;  // M_single
  std::size_t hole_pixels = 0;
  std::size_t uncovered_hole_pixels = 0;
  /// Mean fallback share (1 - M_single) over hole pixels.
  double fallback_fraction = 0.0;
};

/// target * M + (M_single * warp + (1 - M_single) * fallback) * (1 - M).
/// Known pixels are copied bit for bit. `fallback` may be null only when the
/// rendered alpha covers the whole hole; M_single is then the unfeathered
/// alpha.
CompositeResult compose(const Image& target, const HoleMask& mask, const Image& warp_rgba,
                        const Image* fallback, const CompositeConfig& cfg);

}  // namespace geofill
