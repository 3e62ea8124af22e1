#include "geofill/evaluate.hpp"

#include <cstdio>
#include <functional>

#include "geofill/error.hpp"
#include "geofill/pipeline.hpp"
#include "json.hpp"

namespace geofill {

namespace {

using Json = nlohmann::ordered_json;

void merge_error(SceneEvaluation& e, const std::string& protocol, const std::string& what) {
  if (!e.error.empty()) e.error += "; ";
  e.error += protocol + ": " + what;
}

Json opt_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json pose_json(const std::optional<PoseError>& p) {
  if (!p) return nullptr;
  return Json{{"rotation_deg", p->rotation_deg}, {"translation_deg", p->translation_deg}};
}

Json depth_json(const std::optional<DepthMetrics>& d) {
  if (!d) return nullptr;
  return Json{{"abs_rel", d->abs_rel}, {"sq_rel", d->sq_rel}, {"rms_log", d->rms_log},
              {"delta1", d->delta1},   {"delta2", d->delta2}, {"evaluated", d->evaluated},
              {"excluded", d->excluded}};
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}

Image effective_depth(const Image& raw, double s, double b) {
  Image out = raw;
  for (auto& v : out.data()) v = static_cast<float>(s * v + b);
  return out;
}

}  // namespace

BinaryMap hole_region(const HoleMask& mask) {
  BinaryMap m(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) m.at(x, y) = mask.is_hole(x, y) ? 1 : 0;
  }
  return m;
}

double homography_baseline_psnr(const SceneBundle& b, const PipelineConfig& cfg) {
  const PoseInitialization init = initialize_pose(b.correspondences, b.intrinsics, cfg);
  const Mat3 h = fit_homography(init.correspondences.inlier_subset());
  const Image warp = warp_homography(b.source, h, b.target.width(), b.target.height());
  const Image alpha = warp.channel(3);
  Image rgb(warp.width(), warp.height(), 3);
  for (int y = 0; y < warp.height(); ++y) {
    for (int x = 0; x < warp.width(); ++x) {
      for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = warp.at(x, y, c);
    }
  }
  Image corrected = warp;
  if (cfg.color_correction == ColorCorrection::kGainBias) {
    const ColorCorrectionResult cc = color_correct(rgb, b.target, b.mask, alpha);
    for (int y = 0; y < warp.height(); ++y) {
      for (int x = 0; x < warp.width(); ++x) {
        for (int c = 0; c < 3; ++c) corrected.at(x, y, c) = cc.image.at(x, y, c);
      }
    }
  }
  const Image fallback = constant_fallback(b.target, b.mask, cfg.fallback_color);
  const CompositeResult comp = compose(b.target, b.mask, corrected, &fallback, cfg.composite());
  const BinaryMap hole = hole_region(b.mask);
  return psnr(comp.image, b.target_gt, &hole);
}

SceneEvaluation evaluate_bundle(const SceneBundle& b, const std::string& name,
                                const PipelineConfig& cfg, const EvalProtocols& protocols) {
  SceneEvaluation e;
  e.name = name;
  const CameraIntrinsics& k = b.intrinsics;
  auto guarded = [&](const char* protocol, const std::function<void()>& body) {
    try {
      body();
    } catch (const Error& err) {
      merge_error(e, protocol, err.what());
    }
  };

  if (protocols.pose) {
    guarded("pose", [&] {
      PipelineConfig c = cfg;
      c.optimize = OptimizeSet::kPose;
      const PoseInitialization init = initialize_pose(b.correspondences, k, c);
      RelativePose start = init.pose;
      start.translation *= translation_scale(init.correspondences, init.pose, k, b.depth_gt);
      const RefineProblem problem{b.source, b.depth_gt, b.target, b.mask, k, init.correspondences};
      const OptimizeResult r = refine(problem, pack_params(start, 1.0, 0.0), c);
      e.pose_init = pose_error(start, b.pose_gt);
      e.pose_opt = pose_error(unpack_pose(r.params), b.pose_gt);
      e.degraded = e.degraded || r.degraded;
    });
  }
  if (protocols.depth) {
    guarded("depth", [&] {
      PipelineConfig c = cfg;
      c.optimize = OptimizeSet::kDepth;
      CorrespondenceSet corr = initialize_pose(b.correspondences, k, c).correspondences;
      const ScaleOffset so = initialize_depth(b.depth, corr, b.pose_gt, k);
      const RefineProblem problem{b.source, b.depth, b.target, b.mask, k, corr};
      const OptimizeResult r = refine(problem, pack_params(b.pose_gt, so.scale, so.offset), c);
      e.depth_init = depth_metrics(effective_depth(b.depth, so.scale, so.offset), b.depth_gt);
      e.depth_opt = depth_metrics(
          effective_depth(b.depth, r.params[param::kScale], r.params[param::kOffset]), b.depth_gt);
      e.degraded = e.degraded || r.degraded;
    });
  }
  if (protocols.fill) {
    guarded("fill", [&] {
      const FillInputs in{b.source, b.target, b.mask, b.depth, b.correspondences, std::nullopt, k};
      const FillResult r = run_fill(in, cfg);
      e.degraded = e.degraded || r.degraded;
      if (r.no_hole) return;
      const BinaryMap hole = hole_region(b.mask);
      e.fill.psnr = psnr(r.composite, b.target_gt, &hole);
      e.fill.ssim = ssim(r.composite, b.target_gt, &hole);
      e.fill.pose = pose_error(r.pose, b.pose_gt);
      const Image fallback = constant_fallback(b.target, b.mask, cfg.fallback_color);
      e.psnr_fallback = psnr(fallback, b.target_gt, &hole);
      e.psnr_homography = homography_baseline_psnr(b, cfg);
    });
  }
  return e;
}

std::string evaluation_json(const SceneEvaluation& e) {
  Json j;
  j["scene"] = e.name;
  j["pose"] = {{"init", pose_json(e.pose_init)}, {"optimized", pose_json(e.pose_opt)}};
  j["depth"] = {{"init", depth_json(e.depth_init)}, {"optimized", depth_json(e.depth_opt)}};
  j["fill"] = {{"psnr", opt_number(e.fill.psnr)},
               {"ssim", opt_number(e.fill.ssim)},
               {"pose", pose_json(e.fill.pose)},
               {"psnr_fallback", opt_number(e.psnr_fallback)},
               {"psnr_homography", opt_number(e.psnr_homography)}};
  j["degraded"] = e.degraded;
  j["error"] = e.error;
  return j.dump(2) + "\n";
}

std::string evaluation_csv(const std::vector<SceneEvaluation>& rows) {
  std::string out =
      "scene,rot_init_deg,rot_opt_deg,trans_init_deg,trans_opt_deg,abs_rel_init,abs_rel_opt,"
      "sq_rel_opt,rms_log_opt,delta1_opt,delta2_opt,psnr,ssim,psnr_fallback,psnr_homography,"
      "degraded,error\n";
  auto rot = [](const std::optional<PoseError>& p) {
    return p ? std::optional<double>(p->rotation_deg) : std::nullopt;
  };
  auto trans = [](const std::optional<PoseError>& p) {
    return p ? std::optional<double>(p->translation_deg) : std::nullopt;
  };
  auto depth = [](const std::optional<DepthMetrics>& d, double DepthMetrics::*field) {
    return d ? std::optional<double>((*d).*field) : std::nullopt;
  };
  for (const auto& e : rows) {
    std::string error = e.error;
    for (auto& ch : error) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    }
    out += e.name + "," + cell(rot(e.pose_init)) + "," + cell(rot(e.pose_opt)) + "," +
           cell(trans(e.pose_init)) + "," + cell(trans(e.pose_opt)) + "," +
           cell(depth(e.depth_init, &DepthMetrics::abs_rel)) + "," +
           cell(depth(e.depth_opt, &DepthMetrics::abs_rel)) + "," +
           cell(depth(e.depth_opt, &DepthMetrics::sq_rel)) + "," +
           cell(depth(e.depth_opt, &DepthMetrics::rms_log)) + "," +
           cell(depth(e.depth_opt, &DepthMetrics::delta1)) + "," +
           cell(depth(e.depth_opt, &DepthMetrics::delta2)) + "," + cell(e.fill.psnr) + "," +
           cell(e.fill.ssim) + "," + cell(e.psnr_fallback) + "," + cell(e.psnr_homography) + "," +
           (e.degraded ? "1" : "0") + "," + error + "\n";
  }
  return out;
}

}  // namespace geofill
