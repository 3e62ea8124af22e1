#pragma once

#include "geofill/epipolar.hpp"
#include "geofill/image.hpp"

namespace geofill {

struct ScaleOffset {
  double scale = 1.0;
  double offset = 0.0;
  std::size_t samples_used = 0;
};

/// Least-squares s, b with s*raw(p) + b ~ sparse depth(p), raw sampled
/// bilinearly. Samples whose triangulation residual lies above the 90th
/// percentile are discarded before the fit.
ScaleOffset fit_scale_offset(const Image& raw, const SparseDepthMap& sparse);

}  // namespace geofill
