#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "geofill/camera.hpp"
#include "geofill/image.hpp"
#include "geofill/imgproc.hpp"

namespace geofill {

struct SceneConfig {
  int width = 256;
  int height = 192;
  double focal = 0.0;  // 0 selects 0.8 * width
  int n_planes = 4;    // 2 walls; a floor from 3; floating panels from 4 (max 6)
  bool heightfield = true;  // Gaussian bump on the floor (needs n_planes >= 3)
  double baseline = 0.4;
  double rotation_deg = 5.0;
  double texture_freq = 0.8;  // cycles per world unit

  void validate() const;
};

/// Procedural texture of one surface, evaluated in surface-local axes.
struct SurfaceShader {
  Vec3 axis_a = Vec3::UnitX();
  Vec3 axis_b = Vec3::UnitY();
  std::array<double, 3> base{0.5, 0.5, 0.5};
  std::array<double, 3> amplitude{0.2, 0.2, 0.2};
  std::array<double, 3> phase{0.0, 0.0, 0.0};
  double freq = 0.8;

  std::array<float, 3> shade(const Vec3& world) const;
};

/// Triangle soup in the world frame, which is the source camera frame.
struct SceneGeometry {
  std::vector<Vec3> vertices;
  std::vector<int> surface;  // per vertex
  std::vector<std::array<int, 3>> triangles;
  std::vector<SurfaceShader> shaders;
};

struct RenderedView {
  Image rgb;
  Image depth;  // camera-frame z, always positive for a valid scene
};

RenderedView render_view(const SceneGeometry& geometry, const RelativePose& world_to_camera,
                         const CameraIntrinsics& k, int width, int height);

struct SyntheticScene {
  std::uint64_t seed = 0;
  SceneConfig config;
  CameraIntrinsics intrinsics;
  RelativePose pose;  // source camera -> target camera
  SceneGeometry geometry;
  Image source;
  Image target;
  Image source_depth;
  Image target_depth;
  double covisible_fraction = 0.0;
};

/// Fraction of source pixels whose surface point is visible in the target.
double covisible_fraction(const Image& source_depth, const Image& target_depth,
                          const CameraIntrinsics& k, const RelativePose& pose);

/// Target pixels whose surface point is visible in the source.
BinaryMap target_visible_in_source(const SyntheticScene& scene);

/// Deterministic per (seed, config). Throws DegenerateError when the
/// geometry leaves a pixel uncovered or less than 30% of the source is
/// visible in the target.
SyntheticScene generate_scene(std::uint64_t seed, const SceneConfig& cfg);

struct LabeledCorrespondences {
  CorrespondenceSet set;
  std::vector<bool> outlier;  // ground truth, per pair
};

/// n source pixels (integer positions) with a visible surface point are
/// projected into the target; Gaussian noise perturbs the target point.
/// round(n * outlier_frac) pairs, at random positions, get a uniformly random
/// target point instead. Target points inside the hole of `target_mask`
/// (when given) are never produced.
LabeledCorrespondences sample_correspondences(const SyntheticScene& scene, int n, double noise_px,
                                              double outlier_frac, std::uint64_t seed,
                                              const HoleMask* target_mask = nullptr);

/// Random-walk polylines of 4-12 vertices stamped with a round brush of
/// diameter width_px.
HoleMask generate_stroke_mask(int width, int height, int n_strokes, double width_px,
                              std::uint64_t seed);

/// Two times the mean distance-to-boundary along the hole's skeleton.
double measure_stroke_width(const HoleMask& mask);

/// Applied in the order blur, multiplicative noise, affine.
struct DepthPerturbation {
  double scale = 1.0;
  double offset = 0.0;
  double noise_sigma = 0.0;  // relative, per pixel
  int blur_radius = 0;       // box filter half-width
  std::uint64_t seed = 0;
};

Image perturb_depth(const Image& gt_depth, const DepthPerturbation& p);

}  // namespace geofill
