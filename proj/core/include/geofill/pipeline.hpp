#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "geofill/compositor.hpp"
#include "geofill/config.hpp"
#include "geofill/depth_align.hpp"
#include "geofill/epipolar.hpp"
#include "geofill/optimizer.hpp"
#include "geofill/render.hpp"
#include "geofill/weights.hpp"

namespace geofill {

struct FillInputs {
  Image source;  // RGB
  Image target;  // RGB; hole content is ignored
  HoleMask mask;
  Image depth;  // raw source depth, any affine scale
  CorrespondenceSet correspondences;
  std::optional<Image> fallback;               // RGB; constant fill when absent
  std::optional<CameraIntrinsics> intrinsics;  // overrides the config camera
};

/// Overrides used by the evaluation protocols.
struct FillOptions {
  TraceSink trace;
  std::optional<RelativePose> init_pose;
  std::optional<ScaleOffset> init_depth;
  bool keep_mesh = false;
};

struct FillResult {
  Image composite;
  bool no_hole = false;
  CameraIntrinsics intrinsics;
  FundamentalEstimate fundamental;
  RelativePose init_pose;
  ScaleOffset init_depth;
  OptimizeResult optimization;
  RelativePose pose;
  double scale = 1.0;
  double offset = 0.0;
  WeightMap weights;
  RenderResult render;
  ColorCorrectionResult color;
  CompositeResult composite_info;
  std::optional<TexturedMesh> mesh;
  double coverage_fraction = 1.0;  // hole pixels the render fully covers
  bool degraded = false;
  std::string degraded_reason;
};

/// Throws StageError naming the failing stage (input, epipolar, depth_align,
/// optimize, render, compose). With no hole in the mask the target is
/// returned unchanged and no stage runs.
FillResult run_fill(const FillInputs& in, const PipelineConfig& cfg, const FillOptions& opt = {});

struct PoseInitialization {
  FundamentalEstimate fundamental;
  CorrespondenceSet correspondences;  // inlier flags from RANSAC
  RelativePose pose;                  // unit translation
};

PoseInitialization initialize_pose(const CorrespondenceSet& corr, const CameraIntrinsics& k,
                                   const PipelineConfig& cfg);

/// Scale/offset mapping raw depth onto depths triangulated from the inliers
/// under `pose`.
ScaleOffset initialize_depth(const Image& raw, const CorrespondenceSet& corr,
                             const RelativePose& pose, const CameraIntrinsics& k);

/// Median ratio of `depth` to inlier depths triangulated under `pose`:
/// the factor that brings the translation to the depth map's scale.
double translation_scale(const CorrespondenceSet& corr, const RelativePose& pose,
                         const CameraIntrinsics& k, const Image& depth);

struct RefineProblem {
  const Image& source;
  const Image& raw_depth;
  const Image& target;
  const HoleMask& mask;
  const CameraIntrinsics& k;
  const CorrespondenceSet& correspondences;
};

/// Builds the weight maps and objective and runs the coarse-to-fine
/// optimization over the parameters selected by cfg.optimize.
OptimizeResult refine(const RefineProblem& problem, const ParamVector& init,
                      const PipelineConfig& cfg, const TraceSink& trace = {},
                      WeightMap* weights_out = nullptr);

/// Uniform RGB image of the mean known target color, or of `color`.
Image constant_fallback(const Image& target, const HoleMask& mask,
                        const std::optional<std::array<double, 3>>& color);

std::string fill_report_json(const FillResult& r, const PipelineConfig& cfg);
std::string trace_entry_json(const TraceEntry& e);

/// Hole outline, disocclusion mask, correspondence reprojection arrows and
/// the weight map, as PNGs in `dir`.
void write_debug_overlays(const FillInputs& in, const FillResult& r, const std::filesystem::path& dir);

}  // namespace geofill
