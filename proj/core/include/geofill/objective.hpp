#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geofill/camera.hpp"
#include "geofill/image.hpp"
#include "geofill/params.hpp"
#include "geofill/pyramid.hpp"
#include "geofill/warp.hpp"
#include "geofill/weights.hpp"

namespace geofill {

/// General robust loss with shape alpha and scale c:
/// |a-2|/a * (((x/c)^2 / |a-2| + 1)^(a/2) - 1). Requires c > 0, a != 0, 2.
double robust_fn(double x, double alpha, double c);

/// d robust_fn / d(x^2); smooth at x = 0.
double robust_fn_dsq(double x_squared, double alpha, double c);

/// sum W * coverage * |alpha * warp - target_premult|^2 / sum alpha * coverage
/// over pixels with coverage above kMinCoverage. nullopt when the
/// normalizer is below 1e-6.
std::optional<double> photometric_loss(const WarpResult& warp, const Image& target_rgba,
                                       const Image& w);

/// Mean of W(q_t) * robust(|q_s->t - q_t|) over valid projections.
/// Throws DegenerateError when none is valid.
double feature_loss(const std::vector<PointProjection>& projected,
                    const std::vector<Vec2>& target_points, const std::vector<double>& w,
                    double alpha, double c);

/// sum max(0, -(s * raw + b)).
double negative_depth_penalty(const DepthState& depth);

struct LossWeights {
  double photo = 10.0;
  double feat = 10.0;
  double negd = 0.5;
};

struct LossBreakdown {
  double photo = 0.0;
  double feat = 0.0;
  double negd = 0.0;
  double total = 0.0;
  int skipped_levels = 0;
  int valid_features = 0;
};

LossBreakdown total_loss(double photo, double feat, double negd, const LossWeights& lambda);

enum class FeatureWeighting { kFull, kHoleOnly, kUniform };

FeatureWeighting parse_feature_weighting(const std::string& name);
std::string to_string(FeatureWeighting fw);

struct ObjectiveOptions {
  LossWeights lambda;
  double robust_alpha = -2.0;
  double robust_scale = 10.0;
  int levels = 4;
  FeatureWeighting feature_weighting = FeatureWeighting::kFull;
};

/// Smallest pyramid level the objective accepts, per side.
inline constexpr int kMinLevelSize = 4;

/// Joint photometric + feature + negative-depth objective over the 9
/// parameters. Immutable after construction; evaluate() is const and
/// reentrant.
///
/// At pyramid stage l the photometric term is the sum of per-level losses
/// over levels l .. L-1, each warping that level of the source with the
/// matching level of the raw depth and K / 2^l. Feature and negative-depth
/// terms are evaluated at full resolution.
class JointObjective {
 public:
  JointObjective(const Image& source, const Image& raw_depth, const Image& target,
                 const HoleMask& mask, const CameraIntrinsics& k,
                 const CorrespondenceSet& correspondences, const WeightMap& weights,
                 const ObjectiveOptions& options);

  int levels() const noexcept { return static_cast<int>(source_.size()); }
  const ObjectiveOptions& options() const noexcept { return options_; }
  std::size_t feature_count() const noexcept { return src_points_.size(); }

  /// Loss at stage `level`; fills `grad` (w.r.t. the raw 9-vector) when
  /// non-null.
  LossBreakdown evaluate(const ParamVector& params, int level, ParamVector* grad = nullptr) const;

  /// Photometric loss of one pyramid level; nullopt when skipped.
  std::optional<double> level_photometric(const ParamVector& params, int level,
                                          ParamVector* grad) const;

 private:
  double features(const ParamVector& params, ParamVector* grad, int* valid) const;
  double negative_depth(const ParamVector& params, ParamVector* grad) const;

  ObjectiveOptions options_;
  CameraIntrinsics k_;
  std::vector<Image> source_;
  std::vector<Image> raw_;
  std::vector<Image> target_;  // premultiplied RGBA
  std::vector<Image> weight_;
  Image raw_full_;
  std::vector<Vec2> src_points_;
  std::vector<Vec2> dst_points_;
  std::vector<double> src_raw_;
  std::vector<double> feat_weight_;
};

}  // namespace geofill
