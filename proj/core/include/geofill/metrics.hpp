#pragma once

#include <optional>

#include "geofill/camera.hpp"
#include "geofill/image.hpp"
#include "geofill/imgproc.hpp"

namespace geofill {

struct PoseError {
  double rotation_deg = 0.0;
  double translation_deg = 0.0;  // angle between translation directions
};

/// Geodesic rotation distance and scale-free translation direction angle.
/// Throws DegenerateError for a zero-length estimated translation.
PoseError pose_error(const RelativePose& est, const RelativePose& gt);

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rms_log = 0.0;
  double delta1 = 0.0;  // fraction with max(e/g, g/e) < 1.25
  double delta2 = 0.0;  // ... < 1.25^2
  std::size_t evaluated = 0;
  std::size_t excluded = 0;  // in the region but with non-positive est or gt
};

/// Over pixels of `valid` (all pixels when null).
DepthMetrics depth_metrics(const Image& est, const Image& gt, const BinaryMap* valid = nullptr);

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all channels of the region's pixels; kPsnrCap when
/// MSE < 1e-10.
double psnr(const Image& a, const Image& b, const BinaryMap* region = nullptr);

/// Mean SSIM (11x11 Gaussian window, sigma 1.5) over windows lying fully
/// inside the image, restricted to window centers in `region` when given,
/// averaged over channels.
double ssim(const Image& a, const Image& b, const BinaryMap* region = nullptr);

struct MetricReport {
  std::optional<double> psnr;
  std::optional<double> ssim;
  std::optional<PoseError> pose;
  std::optional<DepthMetrics> depth;
};

/// Maps source pixels to target pixels, normalized DLT over every pair.
/// Needs at least 4 pairs.
Mat3 fit_homography(const CorrespondenceSet& pairs);

/// Inverse-maps every target pixel through H^-1 and samples the source
/// bilinearly. Returns straight RGBA with alpha 0 where the preimage falls
/// outside the source.
Image warp_homography(const Image& source_rgb, const Mat3& h, int width, int height);

}  // namespace geofill
