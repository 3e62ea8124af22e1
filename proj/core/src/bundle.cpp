#include "geofill/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "geofill/error.hpp"
#include "geofill/io.hpp"
#include "geofill/rng.hpp"
#include "json.hpp"

namespace geofill {

namespace fs = std::filesystem;

namespace {

using Json = nlohmann::ordered_json;

constexpr int kMaxMaskAttempts = 64;

constexpr const char* kFiles[] = {
    "source.png",      "target.png",          "target_gt.png",
    "mask.png",        "depth.pfm",           "depth_gt.pfm",
    "target_depth_gt.pfm", "correspondences.csv", "correspondence_labels.txt",
    "pose_gt.json",    "intrinsics.json",     "scene.json"};

}  // namespace

void SynthOptions::validate() const {
  scene.validate();
  if (correspondences < 8) throw PreconditionError("synth: need at least 8 correspondences");
  if (noise_px < 0.0) throw PreconditionError("synth: noise must be >= 0");
  if (!(outlier_frac >= 0.0 && outlier_frac <= 1.0)) {
    throw PreconditionError("synth: outlier fraction must be in [0, 1]");
  }
  if (n_strokes < 0) throw PreconditionError("synth: stroke count must be >= 0");
  if (stroke_width < 0.0) throw PreconditionError("synth: stroke width must be >= 0");
  if (!(max_hidden_hole >= 0.0 && max_hidden_hole <= 1.0)) {
    throw PreconditionError("synth: max hidden hole fraction must be in [0, 1]");
  }
  if (!(depth.scale > 0.0)) throw PreconditionError("synth: depth scale must be > 0");
}

Image quantize_8bit(const Image& img) {
  Image out = img;
  for (auto& v : out.data()) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  return out;
}

SceneBundle make_bundle(const SynthOptions& opt) {
  opt.validate();
  Rng master(opt.seed);
  const std::uint64_t scene_seed = master.next();
  const std::uint64_t mask_seed = master.next();
  const std::uint64_t corr_seed = master.next();
  const std::uint64_t depth_seed = master.next();

  const SyntheticScene scene = generate_scene(scene_seed, opt.scene);
  const int w = opt.scene.width, h = opt.scene.height;
  const double width =
      opt.stroke_width > 0.0 ? opt.stroke_width : 0.25 * std::min(w, h);

  SceneBundle b;
  b.intrinsics = scene.intrinsics;
  b.pose_gt = scene.pose;
  b.source = quantize_8bit(scene.source);
  b.target_gt = quantize_8bit(scene.target);
  std::uint64_t used_mask_seed = mask_seed;
  int mask_attempts = 0;
  const BinaryMap visible = opt.max_hidden_hole < 1.0 ? target_visible_in_source(scene) : BinaryMap();
  for (;;) {
    b.mask = generate_stroke_mask(w, h, opt.n_strokes, width, used_mask_seed);
    if (opt.max_hidden_hole >= 1.0) break;
    std::size_t hole = 0, hidden = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!b.mask.is_hole(x, y)) continue;
        ++hole;
        if (!visible.at(x, y)) ++hidden;
      }
    }
    if (static_cast<double>(hidden) <= opt.max_hidden_hole * static_cast<double>(hole)) break;
    if (++mask_attempts >= kMaxMaskAttempts) {
      throw DegenerateError("synth: no stroke mask keeps the hole visible from the source");
    }
    used_mask_seed = master.next();
  }
  b.target = b.target_gt;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!b.mask.is_hole(x, y)) continue;
      for (int c = 0; c < 3; ++c) b.target.at(x, y, c) = 0.0f;
    }
  }
  b.depth_gt = scene.source_depth;
  b.target_depth_gt = scene.target_depth;
  DepthPerturbation dp = opt.depth;
  dp.seed = depth_seed;
  b.depth = perturb_depth(scene.source_depth, dp);
  LabeledCorrespondences lc = sample_correspondences(scene, opt.correspondences, opt.noise_px,
                                                     opt.outlier_frac, corr_seed, &b.mask);
  b.correspondences = std::move(lc.set);
  b.outlier = std::move(lc.outlier);

  Json j;
  j["seed"] = opt.seed;
  j["scene_seed"] = scene_seed;
  j["mask_seed"] = used_mask_seed;
  j["correspondence_seed"] = corr_seed;
  j["depth_seed"] = depth_seed;
  j["width"] = w;
  j["height"] = h;
  j["n_planes"] = opt.scene.n_planes;
  j["heightfield"] = opt.scene.heightfield;
  j["baseline"] = opt.scene.baseline;
  j["rotation_deg"] = opt.scene.rotation_deg;
  j["texture_freq"] = opt.scene.texture_freq;
  j["correspondences"] = opt.correspondences;
  j["noise_px"] = opt.noise_px;
  j["outlier_frac"] = opt.outlier_frac;
  j["n_strokes"] = opt.n_strokes;
  j["stroke_width"] = width;
  j["max_hidden_hole"] = opt.max_hidden_hole;
  j["depth_scale"] = opt.depth.scale;
  j["depth_offset"] = opt.depth.offset;
  j["depth_noise_sigma"] = opt.depth.noise_sigma;
  j["depth_blur_radius"] = opt.depth.blur_radius;
  j["covisible_fraction"] = scene.covisible_fraction;
  j["hole_pixels"] = b.mask.hole_count();
  b.scene_json = j.dump(2) + "\n";
  return b;
}

void write_bundle(const SceneBundle& b, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw PreconditionError("cannot create bundle directory " + dir.string());
  }
  write_png(b.source, dir / "source.png");
  write_png(b.target, dir / "target.png");
  write_png(b.target_gt, dir / "target_gt.png");
  write_mask_png(b.mask, dir / "mask.png");
  write_depth_pfm(b.depth, dir / "depth.pfm");
  write_depth_pfm(b.depth_gt, dir / "depth_gt.pfm");
  write_depth_pfm(b.target_depth_gt, dir / "target_depth_gt.pfm");
  write_correspondences_csv(b.correspondences, dir / "correspondences.csv");
  std::string labels;
  for (bool o : b.outlier) labels += o ? "outlier\n" : "inlier\n";
  write_text_file(dir / "correspondence_labels.txt", labels);
  write_pose_json(b.pose_gt, dir / "pose_gt.json");
  write_intrinsics_json(b.intrinsics, dir / "intrinsics.json");
  write_text_file(dir / "scene.json", b.scene_json);
}

SceneBundle read_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("bundle: " + dir.string() + " is not a directory");
  for (const char* f : kFiles) {
    if (!fs::exists(dir / f)) throw FormatError("bundle " + dir.string() + ": missing " + f);
  }
  SceneBundle b;
  b.source = read_png_rgb(dir / "source.png");
  b.target = read_png_rgb(dir / "target.png");
  b.target_gt = read_png_rgb(dir / "target_gt.png");
  b.mask = read_mask_png(dir / "mask.png");
  b.depth = read_depth_pfm(dir / "depth.pfm");
  b.depth_gt = read_depth_pfm(dir / "depth_gt.pfm");
  b.target_depth_gt = read_depth_pfm(dir / "target_depth_gt.pfm");
  b.correspondences = read_correspondences_csv(
      dir / "correspondences.csv",
      ImageBounds{b.source.width(), b.source.height(), b.target.width(), b.target.height()});
  std::istringstream labels(read_text_file(dir / "correspondence_labels.txt"));
  std::string line;
  while (std::getline(labels, line)) {
    if (line == "outlier") {
      b.outlier.push_back(true);
    } else if (line == "inlier") {
      b.outlier.push_back(false);
    } else if (!line.empty()) {
      throw FormatError("bundle: bad correspondence label \"" + line + "\"");
    }
  }
  if (b.outlier.size() != b.correspondences.size()) {
    throw FormatError("bundle: label count differs from correspondence count");
  }
  b.pose_gt = read_pose_json(dir / "pose_gt.json");
  b.intrinsics = read_intrinsics_json(dir / "intrinsics.json");
  b.scene_json = read_text_file(dir / "scene.json");
  const bool dims_ok = b.target.same_dims(b.source) && b.target_gt.same_dims(b.source) &&
                       b.depth.same_dims(b.source) && b.depth_gt.same_dims(b.source) &&
                       b.target_depth_gt.same_dims(b.source) &&
                       b.mask.width() == b.source.width() && b.mask.height() == b.source.height();
  if (!dims_ok) throw FormatError("bundle " + dir.string() + ": raster dimensions differ");
  return b;
}

SyntheticScene to_scene(const SceneBundle& b) {
  SyntheticScene s;
  s.intrinsics = b.intrinsics;
  s.pose = b.pose_gt;
  s.source = b.source;
  s.target = b.target_gt;
  s.source_depth = b.depth_gt;
  s.target_depth = b.target_depth_gt;
  s.config.width = b.source.width();
  s.config.height = b.source.height();
  s.covisible_fraction = covisible_fraction(s.source_depth, s.target_depth, s.intrinsics, s.pose);
  return s;
}

}  // namespace geofill
