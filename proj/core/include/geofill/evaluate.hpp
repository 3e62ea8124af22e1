#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geofill/bundle.hpp"
#include "geofill/config.hpp"
#include "geofill/metrics.hpp"

namespace geofill {

struct EvalProtocols {
  bool pose = true;   // depth fixed to ground truth, pose optimized
  bool depth = true;  // pose fixed to ground truth, depth scale/offset optimized
  bool fill = true;   // full pipeline, composite scored inside the hole
};

struct SceneEvaluation {
  std::string name;
  std::optional<PoseError> pose_init;
  std::optional<PoseError> pose_opt;
  std::optional<DepthMetrics> depth_init;
  std::optional<DepthMetrics> depth_opt;
  MetricReport fill;                       // hole PSNR/SSIM plus the full pipeline's pose
  std::optional<double> psnr_fallback;     // fallback-only fill
  std::optional<double> psnr_homography;   // single-homography baseline
  bool degraded = false;
  std::string error;  // non-empty when a protocol failed
};

/// Runs the selected protocols. Protocol failures are recorded in `error`
/// rather than thrown.
SceneEvaluation evaluate_bundle(const SceneBundle& b, const std::string& name,
                                const PipelineConfig& cfg, const EvalProtocols& protocols = {});

/// Fill score of a homography fitted to the RANSAC inliers and composited
/// like the pipeline's render.
double homography_baseline_psnr(const SceneBundle& b, const PipelineConfig& cfg);

BinaryMap hole_region(const HoleMask& mask);

std::string evaluation_json(const SceneEvaluation& e);

/// Header plus one row per scene; absent values are empty cells.
std::string evaluation_csv(const std::vector<SceneEvaluation>& rows);

}  // namespace geofill
