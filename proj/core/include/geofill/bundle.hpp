#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geofill/camera.hpp"
#include "geofill/image.hpp"
#include "geofill/synth.hpp"

namespace geofill {

struct SynthOptions {
  std::uint64_t seed = 0;
  SceneConfig scene;
  int correspondences = 300;
  double noise_px = 0.5;
  double outlier_frac = 0.2;
  int n_strokes = 1;
  double stroke_width = 0.0;  // 0 selects a quarter of the shorter image side
  /// Masks are redrawn until at most this fraction of the hole is hidden
  /// from the source view.
  double max_hidden_hole = 1.0;
  DepthPerturbation depth{0.5, 0.3, 0.0, 0, 0};  // seed is drawn from `seed`

  void validate() const;
};

/// A synthetic two-view problem with ground truth, as stored on disk.
/// Colors are quantized to 8 bits so a written bundle reloads exactly.
struct SceneBundle {
  Image source;
  Image target;     // hole zeroed
  Image target_gt;  // full target rendering
  HoleMask mask;
  Image depth;      // perturbed source depth handed to the pipeline
  Image depth_gt;   // source depth
  Image target_depth_gt;
  CorrespondenceSet correspondences;
  std::vector<bool> outlier;  // ground-truth label per correspondence
  RelativePose pose_gt;
  CameraIntrinsics intrinsics;
  std::string scene_json;  // generator options and derived seeds
};

/// One master generator seeded with opt.seed draws the seeds of the scene,
/// mask, correspondences and depth noise. Throws DegenerateError for a
/// rejected scene or when no mask meets max_hidden_hole.
SceneBundle make_bundle(const SynthOptions& opt);

void write_bundle(const SceneBundle& b, const std::filesystem::path& dir);

/// Throws FormatError naming the first missing file.
SceneBundle read_bundle(const std::filesystem::path& dir);

/// Scene view of a reloaded bundle; geometry is not stored and stays empty.
SyntheticScene to_scene(const SceneBundle& b);

/// Rounds every sample to the nearest multiple of 1/255 after clamping.
Image quantize_8bit(const Image& img);

}  // namespace geofill
