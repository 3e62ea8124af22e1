#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geofill/camera.hpp"
#include "geofill/compositor.hpp"
#include "geofill/epipolar.hpp"
#include "geofill/objective.hpp"
#include "geofill/optimizer.hpp"
#include "geofill/weights.hpp"

namespace geofill {

/// Which parameters the joint optimization may move.
enum class OptimizeSet { kAll, kPose, kDepth };

OptimizeSet parse_optimize_set(const std::string& name);
std::string to_string(OptimizeSet set);
ParamMask param_mask(OptimizeSet set);

struct PipelineConfig {
  // Loss and optimizer.
  double lambda_photo = 10.0;
  double lambda_feat = 10.0;
  double lambda_negd = 0.5;
  double learning_rate = 1e-2;
  std::vector<int> level_caps = {4000, 7000, 9000, 10000};  // cumulative, coarse to fine
  int pyramid_levels = 4;
  double eps_opt = 1e-6;
  int history_length = 10;
  OptimizeSet optimize = OptimizeSet::kAll;

  // Weight maps.
  double sigma_hole = 192.0;
  int edge_scales = 4;
  int edge_dilation = 4;
  bool use_hole_weight = true;
  bool use_edge_weight = true;
  FeatureWeighting feature_weighting = FeatureWeighting::kFull;

  // Geometry.
  double focal = 750.0;
  std::optional<std::array<double, 2>> principal_point;  // image center when unset
  double eps_edge = 0.04;
  double robust_alpha = -2.0;
  double robust_scale = 10.0;

  // Pose initialization.
  double ransac_threshold = 1.0;
  int ransac_max_iters = 2000;
  double ransac_confidence = 0.99;
  std::uint64_t seed = 0;

  // Compositing.
  double feather_radius = 8.0;
  ColorCorrection color_correction = ColorCorrection::kGainBias;
  std::optional<std::array<double, 3>> fallback_color;  // mean known target color when unset
  double degraded_fallback_fraction = 0.5;

  /// Throws PreconditionError naming the first offending key.
  void validate() const;

  CameraIntrinsics intrinsics(int width, int height) const;
  ObjectiveOptions objective_options() const;
  WeightOptions weight_options() const;
  Schedule schedule() const;
  RansacConfig ransac() const;
  CompositeConfig composite() const;

  /// Replaces the level caps with default_caps(pyramid_levels, max_iters).
  void set_max_iters(int max_iters);
};

/// Strict parse: unknown keys, wrong types, and invalid values are errors.
/// Absent keys keep their defaults.
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::string& path);

/// Every key in a fixed order; dump(load(dump(c))) == dump(c) byte for byte.
std::string config_to_json(const PipelineConfig& cfg);

}  // namespace geofill
