#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geofill/camera.hpp"

namespace geofill {

/// Rank-2 fundamental matrix with unit Frobenius norm, oriented so that
/// x_t^T F x_s = 0 for pixel coordinates in homogeneous form.
struct FundamentalMatrix {
  Mat3 f = Mat3::Zero();
};

struct RansacConfig {
  double threshold_px = 1.0;
  int max_iters = 2000;
  double confidence = 0.99;
  std::uint64_t seed = 0;
};

struct FundamentalEstimate {
  FundamentalMatrix fundamental;
  std::vector<bool> inliers;
  int iterations = 0;
};

/// Normalized 8-point fit over all given pairs (>= 8).
FundamentalMatrix fit_fundamental_8point(std::span<const Correspondence> pairs);

/// First-order geometric (Sampson) distance in pixels.
double sampson_distance(const FundamentalMatrix& f, const Correspondence& c);

/// RANSAC over minimal 8-point samples, adaptive early exit at the configured
/// confidence, refit on the winning inlier set. Inlier flags are computed
/// against the returned matrix.
FundamentalEstimate estimate_fundamental_ransac(const CorrespondenceSet& corr,
                                                const RansacConfig& cfg);

/// Fundamental matrix induced by a calibrated relative pose (for testing and
/// synthetic data).
FundamentalMatrix fundamental_from_pose(const RelativePose& pose, const CameraIntrinsics& k);

/// Essential-matrix decomposition with a cheirality vote over `inliers`.
/// The returned translation has unit norm.
RelativePose decompose_pose(const FundamentalMatrix& f, const CameraIntrinsics& k,
                            const CorrespondenceSet& inliers);

struct TriangulatedPoint {
  Vec3 point;           // source camera frame
  double residual = 0;  // RMS distance to the two rays
  bool in_front = false;
};

/// Midpoint of the shortest segment between the two viewing rays; this is
/// the exact minimizer of the summed squared ray distances.
TriangulatedPoint triangulate(const Vec2& q_s, const Vec2& q_t, const RelativePose& pose,
                              const CameraIntrinsics& k);

struct TriangulatedCloud {
  std::vector<Vec3> points;
  std::vector<double> residuals;
  std::vector<std::size_t> pair_index;
};

struct SparseDepthSample {
  double x = 0;
  double y = 0;
  double depth = 0;
  double residual = 0;
};

struct SparseDepthMap {
  std::vector<SparseDepthSample> samples;
};

struct Triangulation {
  TriangulatedCloud cloud;
  SparseDepthMap sparse;
};

/// Triangulates every flagged inlier; points behind either camera and
/// near-parallel rays are skipped.
Triangulation triangulate_all(const CorrespondenceSet& corr, const RelativePose& pose,
                              const CameraIntrinsics& k);

}  // namespace geofill
