#include "geofill/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "geofill/error.hpp"
#include "geofill/io.hpp"
#include "geofill/objective.hpp"
#include "geofill/warp.hpp"
#include "json.hpp"

namespace geofill {

namespace {

using Json = nlohmann::ordered_json;

template <class F>
auto run_stage(const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.what());
  }
}

void check_inputs(const FillInputs& in) {
  if (in.source.channels() != 3 || in.target.channels() != 3) {
    throw PreconditionError("source and target must be RGB");
  }
  if (in.depth.channels() != 1) throw PreconditionError("depth must have one channel");
  if (!in.depth.same_dims(in.source)) {
    throw PreconditionError("depth is " + std::to_string(in.depth.width()) + "x" +
                            std::to_string(in.depth.height()) + " but source is " +
                            std::to_string(in.source.width()) + "x" +
                            std::to_string(in.source.height()));
  }
  if (in.mask.width() != in.target.width() || in.mask.height() != in.target.height()) {
    throw PreconditionError("mask and target dimensions differ");
  }
  if (in.fallback && (!in.fallback->same_dims(in.target) || in.fallback->channels() != 3)) {
    throw PreconditionError("fallback must be an RGB image of the target's size");
  }
  in.source.check_finite("source");
  in.target.check_finite("target");
  in.depth.check_finite("depth");
  const int sw = in.source.width(), sh = in.source.height();
  const int tw = in.target.width(), th = in.target.height();
  for (const auto& c : in.correspondences.pairs) {
    if (!(c.xs >= 0 && c.ys >= 0 && c.xs <= sw - 1 && c.ys <= sh - 1 && c.xt >= 0 && c.yt >= 0 &&
          c.xt <= tw - 1 && c.yt <= th - 1)) {
      throw PreconditionError("correspondence outside the image bounds");
    }
  }
}

Json pose_json(const RelativePose& p) {
  return Json{{"quat", {p.rotation[0], p.rotation[1], p.rotation[2], p.rotation[3]}},
              {"t", {p.translation[0], p.translation[1], p.translation[2]}}};
}

Json loss_json(const LossBreakdown& l) {
  return Json{{"total", l.total},   {"photo", l.photo},
              {"feat", l.feat},     {"negd", l.negd},
              {"skipped_levels", l.skipped_levels}, {"valid_features", l.valid_features}};
}

void draw_line(Image& img, Vec2 a, Vec2 b, const std::array<float, 3>& rgb) {
  const int steps = std::max(1, static_cast<int>(std::ceil((b - a).lpNorm<Eigen::Infinity>())));
  for (int i = 0; i <= steps; ++i) {
    const Vec2 p = a + (b - a) * (static_cast<double>(i) / steps);
    const int x = static_cast<int>(std::lround(p.x())), y = static_cast<int>(std::lround(p.y()));
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) continue;
    for (int c = 0; c < 3; ++c) img.at(x, y, c) = rgb[c];
  }
}

Image normalized_for_display(const Image& w) {
  float hi = 0.0f;
  for (float v : w.data()) hi = std::max(hi, v);
  Image out = w;
  if (hi > 0.0f) {
    for (auto& v : out.data()) v /= hi;
  }
  return out;
}

}  // namespace

PoseInitialization initialize_pose(const CorrespondenceSet& corr, const CameraIntrinsics& k,
                                   const PipelineConfig& cfg) {
  PoseInitialization out;
  out.fundamental = estimate_fundamental_ransac(corr, cfg.ransac());
  out.correspondences = corr;
  out.correspondences.inliers = out.fundamental.inliers;
  out.pose = decompose_pose(out.fundamental.fundamental, k, out.correspondences);
  return out;
}

ScaleOffset initialize_depth(const Image& raw, const CorrespondenceSet& corr,
                             const RelativePose& pose, const CameraIntrinsics& k) {
  const Triangulation tri = triangulate_all(corr, pose, k);
  return fit_scale_offset(raw, tri.sparse);
}

double translation_scale(const CorrespondenceSet& corr, const RelativePose& pose,
                         const CameraIntrinsics& k, const Image& depth) {
  const Triangulation tri = triangulate_all(corr, pose, k);
  std::vector<double> ratios;
  for (const auto& s : tri.sparse.samples) {
    const double d = depth.sample_bilinear(s.x, s.y);
    if (d > 0.0 && s.depth > 0.0) ratios.push_back(d / s.depth);
  }
  if (ratios.empty()) throw DegenerateError("no triangulated point for translation scale");
  const auto mid = ratios.begin() + static_cast<std::ptrdiff_t>(ratios.size() / 2);
  std::nth_element(ratios.begin(), mid, ratios.end());
  return *mid;
}

OptimizeResult refine(const RefineProblem& p, const ParamVector& init, const PipelineConfig& cfg,
                      const TraceSink& trace, WeightMap* weights_out) {
  WeightMap weights = build_weight_map(p.target, p.mask, cfg.weight_options());
  const JointObjective objective(p.source, p.raw_depth, p.target, p.mask, p.k, p.correspondences,
                                 weights, cfg.objective_options());
  if (weights_out) *weights_out = std::move(weights);
  return optimize_joint(init, objective, cfg.schedule(), param_mask(cfg.optimize), trace);
}

Image constant_fallback(const Image& target, const HoleMask& mask,
                        const std::optional<std::array<double, 3>>& color) {
  std::array<double, 3> fill{0.5, 0.5, 0.5};
  if (color) {
    fill = *color;
  } else {
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    std::size_t n = 0;
    for (int y = 0; y < target.height(); ++y) {
      for (int x = 0; x < target.width(); ++x) {
        if (mask.is_hole(x, y)) continue;
        for (int c = 0; c < 3; ++c) sum[c] += target.at(x, y, c);
        ++n;
      }
    }
    if (n > 0) {
      for (int c = 0; c < 3; ++c) fill[c] = sum[c] / static_cast<double>(n);
    }
  }
  Image out(target.width(), target.height(), 3);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(fill[c]);
    }
  }
  return out;
}

FillResult run_fill(const FillInputs& in, const PipelineConfig& cfg, const FillOptions& opt) {
  FillResult r;
  run_stage("input", [&] {
    cfg.validate();
    check_inputs(in);
    return 0;
  });
  r.intrinsics = run_stage("input", [&] {
    if (in.intrinsics) {
      in.intrinsics->validate(in.source.width(), in.source.height());
      return *in.intrinsics;
    }
    return cfg.intrinsics(in.source.width(), in.source.height());
  });
  if (!in.mask.has_hole()) {
    r.no_hole = true;
    r.composite = in.target;
    r.coverage_fraction = 1.0;
    return r;
  }
  const CameraIntrinsics& k = r.intrinsics;

  const PoseInitialization init =
      run_stage("epipolar", [&] { return initialize_pose(in.correspondences, k, cfg); });
  r.fundamental = init.fundamental;
  r.init_pose = opt.init_pose ? *opt.init_pose : init.pose;
  r.init_depth = opt.init_depth ? *opt.init_depth : run_stage("depth_align", [&] {
    return initialize_depth(in.depth, init.correspondences, r.init_pose, k);
  });

  r.optimization = run_stage("optimize", [&] {
    const RefineProblem problem{in.source, in.depth, in.target, in.mask, k, init.correspondences};
    return refine(problem, pack_params(r.init_pose, r.init_depth.scale, r.init_depth.offset), cfg,
                  opt.trace, &r.weights);
  });
  r.pose = unpack_pose(r.optimization.params);
  r.pose.canonicalize();
  r.scale = r.optimization.params[param::kScale];
  r.offset = r.optimization.params[param::kOffset];
  if (r.optimization.degraded) {
    r.degraded = true;
    r.degraded_reason = "optimization: " + r.optimization.degraded_reason;
  }

  r.render = run_stage("render", [&] {
    const DepthState depth{in.depth, r.scale, r.offset};
    TexturedMesh mesh = drop_edges(build_mesh(in.source, depth, k), cfg.eps_edge);
    RenderResult out = rasterize(mesh, r.pose, k, in.target.width(), in.target.height());
    if (opt.keep_mesh) r.mesh = std::move(mesh);
    return out;
  });

  run_stage("compose", [&] {
    const Image alpha = r.render.rgba.channel(3);
    Image warp_rgb(in.target.width(), in.target.height(), 3);
    for (int y = 0; y < warp_rgb.height(); ++y) {
      for (int x = 0; x < warp_rgb.width(); ++x) {
        for (int c = 0; c < 3; ++c) warp_rgb.at(x, y, c) = r.render.rgba.at(x, y, c);
      }
    }
    if (cfg.color_correction == ColorCorrection::kGainBias) {
      r.color = color_correct(warp_rgb, in.target, in.mask, alpha);
    } else {
      r.color.image = warp_rgb;
    }
    Image corrected(in.target.width(), in.target.height(), 4);
    std::size_t covered = 0;
    for (int y = 0; y < corrected.height(); ++y) {
      for (int x = 0; x < corrected.width(); ++x) {
        for (int c = 0; c < 3; ++c) corrected.at(x, y, c) = r.color.image.at(x, y, c);
        corrected.at(x, y, 3) = alpha.at(x, y);
        if (in.mask.is_hole(x, y) && alpha.at(x, y) >= 1.0f) ++covered;
      }
    }
    const Image fallback =
        in.fallback ? *in.fallback : constant_fallback(in.target, in.mask, cfg.fallback_color);
    r.composite_info = compose(in.target, in.mask, corrected, &fallback, cfg.composite());
    r.coverage_fraction = static_cast<double>(covered) / static_cast<double>(r.composite_info.hole_pixels);
    return 0;
  });
  r.composite = r.composite_info.image;
  if (r.composite_info.fallback_fraction > cfg.degraded_fallback_fraction) {
    r.degraded = true;
    if (!r.degraded_reason.empty()) r.degraded_reason += "; ";
    r.degraded_reason += "fallback fills " +
                         std::to_string(100.0 * r.composite_info.fallback_fraction) + "% of the hole";
  }
  return r;
}

std::string fill_report_json(const FillResult& r, const PipelineConfig& cfg) {
  Json j;
  j["status"] = r.degraded ? "degraded" : "ok";
  j["degraded_reason"] = r.degraded_reason;
  j["seed"] = cfg.seed;
  j["intrinsics"] = {{"fx", r.intrinsics.fx}, {"fy", r.intrinsics.fy},
                     {"cx", r.intrinsics.cx}, {"cy", r.intrinsics.cy}};
  if (r.no_hole) {
    j["no_hole"] = true;
    j["config"] = Json::parse(config_to_json(cfg));
    return j.dump(2) + "\n";
  }
  std::size_t inliers = 0;
  for (bool b : r.fundamental.inliers) inliers += b ? 1 : 0;
  j["ransac"] = {{"correspondences", r.fundamental.inliers.size()},
                 {"inliers", inliers},
                 {"iterations", r.fundamental.iterations}};
  j["init"] = {{"pose", pose_json(r.init_pose)},
               {"scale", r.init_depth.scale},
               {"offset", r.init_depth.offset},
               {"depth_samples", r.init_depth.samples_used}};
  j["optimized"] = {{"pose", pose_json(r.pose)}, {"scale", r.scale}, {"offset", r.offset}};
  j["loss"] = {{"initial", loss_json(r.optimization.initial_loss)},
               {"final", loss_json(r.optimization.final_loss)}};
  j["iterations"] = r.optimization.iterations;
  Json levels = Json::array();
  for (const auto& l : r.optimization.levels) {
    levels.push_back({{"level", l.level},
                      {"iterations", l.iterations},
                      {"converged", l.converged},
                      {"best_loss", l.best_loss}});
  }
  j["levels"] = levels;
  j["hole_pixels"] = r.composite_info.hole_pixels;
  j["coverage_fraction"] = r.coverage_fraction;
  j["fallback_fraction"] = r.composite_info.fallback_fraction;
  j["color_correction"] = {{"applied", r.color.applied},
                           {"gain", r.color.gain},
                           {"bias", r.color.bias},
                           {"overlap", r.color.overlap}};
  j["config"] = Json::parse(config_to_json(cfg));
  return j.dump(2) + "\n";
}

std::string trace_entry_json(const TraceEntry& e) {
  const Json j{{"iteration", e.iteration}, {"level", e.level},   {"total", e.loss.total},
               {"photo", e.loss.photo},     {"feat", e.loss.feat}, {"negd", e.loss.negd}};
  return j.dump();
}

void write_debug_overlays(const FillInputs& in, const FillResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const int w = in.target.width(), h = in.target.height();

  Image outline = in.target;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!in.mask.is_hole(x, y)) continue;
      for (int c = 0; c < 3; ++c) outline.at(x, y, c) *= 0.5f;
      bool edge = false;
      for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        const int nx = x + dx, ny = y + dy;
        if (nx >= 0 && ny >= 0 && nx < w && ny < h && !in.mask.is_hole(nx, ny)) edge = true;
      }
      if (edge) {
        outline.at(x, y, 0) = 1.0f;
        outline.at(x, y, 1) = 0.0f;
        outline.at(x, y, 2) = 0.0f;
      }
    }
  }
  write_png(outline, dir / "hole_outline.png");

  if (!r.no_hole) {
    Image disocc(w, h, 1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (in.mask.is_hole(x, y) && r.render.rgba.at(x, y, 3) < 1.0f) disocc.at(x, y) = 1.0f;
      }
    }
    write_png(disocc, dir / "disocclusion.png");

    Image arrows = r.composite;
    const ParamVector params = r.optimization.params;
    for (std::size_t i = 0; i < in.correspondences.size(); ++i) {
      const auto& c = in.correspondences.pairs[i];
      const PointProjection pp = project_point(r.intrinsics, params, c.xs, c.ys,
                                               in.depth.sample_bilinear(c.xs, c.ys));
      const bool inlier = i < r.fundamental.inliers.size() && r.fundamental.inliers[i];
      const std::array<float, 3> color = inlier ? std::array<float, 3>{0.0f, 1.0f, 0.0f}
                                                : std::array<float, 3>{1.0f, 0.0f, 0.0f};
      if (pp.valid) draw_line(arrows, pp.uv, Vec2(c.xt, c.yt), color);
    }
    write_png(arrows, dir / "reprojection.png");
    if (!r.weights.w.empty()) write_png(normalized_for_display(r.weights.w), dir / "weights.png");
  }
}

}  // namespace geofill
