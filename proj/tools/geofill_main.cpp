#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geofill/bundle.hpp"
#include "geofill/config.hpp"
#include "geofill/error.hpp"
#include "geofill/evaluate.hpp"
#include "geofill/io.hpp"
#include "geofill/pipeline.hpp"

namespace fs = std::filesystem;
using namespace geofill;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDegraded = 2;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> focal;
  std::optional<int> max_iters;
  std::optional<double> lr;
  std::optional<double> eps_edge;
  std::optional<double> sigma_hole;
  std::optional<int> levels;
  std::optional<double> eps_opt;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "JSON pipeline configuration")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Seed of the single random generator");
    app->add_option("--focal", focal, "Focal length in pixels (fx = fy)");
    app->add_option("--max-iters", max_iters, "Total optimizer iterations, split over levels");
    app->add_option("--lr", lr, "Optimizer learning rate");
    app->add_option("--eps-edge", eps_edge, "Edge-drop threshold for the mesh");
    app->add_option("--sigma-hole", sigma_hole, "Hole-distance weight falloff in pixels");
    app->add_option("--levels", levels, "Pyramid levels");
    app->add_option("--eps-opt", eps_opt, "Convergence threshold");
  }

  PipelineConfig resolve() const {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    if (seed) c.seed = *seed;
    if (focal) c.focal = *focal;
    if (lr) c.learning_rate = *lr;
    if (eps_edge) c.eps_edge = *eps_edge;
    if (sigma_hole) c.sigma_hole = *sigma_hole;
    if (eps_opt) c.eps_opt = *eps_opt;
    if (levels) {
      const int total = c.level_caps.empty() ? 10000 : c.level_caps.back();
      c.pyramid_levels = *levels;
      c.set_max_iters(total);
    }
    if (max_iters) c.set_max_iters(*max_iters);
    c.validate();
    return c;
  }
};

struct FillArgs {
  Overrides overrides;
  std::string bundle, target, mask, source, depth, correspondences, fallback, out;
  bool debug_overlays = false;
  bool dump_mesh = false;
};

int run_fill_command(const FillArgs& a) {
  const PipelineConfig cfg = a.overrides.resolve();
  FillInputs in;
  if (!a.bundle.empty()) {
    const fs::path dir(a.bundle);
    in.source = read_png_rgb(dir / "source.png");
    in.target = read_png_rgb(dir / "target.png");
    in.mask = read_mask_png(dir / "mask.png");
    in.depth = read_depth_pfm(dir / "depth.pfm");
    in.correspondences = read_correspondences_csv(dir / "correspondences.csv");
    in.intrinsics = read_intrinsics_json(dir / "intrinsics.json");
  } else {
    if (a.target.empty() || a.mask.empty() || a.source.empty() || a.depth.empty() ||
        a.correspondences.empty()) {
      throw PreconditionError(
          "fill needs --bundle or all of --target --mask --source --depth --correspondences");
    }
    in.source = read_png_rgb(a.source);
    in.target = read_png_rgb(a.target);
    in.mask = read_mask_png(a.mask);
    in.depth = read_depth_pfm(a.depth);
    in.correspondences = read_correspondences_csv(
        a.correspondences,
        ImageBounds{in.source.width(), in.source.height(), in.target.width(), in.target.height()});
  }
  if (!a.fallback.empty()) in.fallback = read_png_rgb(a.fallback);

  const fs::path out(a.out);
  fs::create_directories(out);
  std::ofstream trace(out / "trace.jsonl", std::ios::binary);
  if (!trace) throw PreconditionError("cannot write " + (out / "trace.jsonl").string());
  FillOptions opt;
  opt.trace = [&trace](const TraceEntry& e) { trace << trace_entry_json(e) << '\n'; };
  opt.keep_mesh = a.dump_mesh;
  const FillResult r = run_fill(in, cfg, opt);
  trace.close();

  write_png(r.composite, out / "composite.png");
  write_text_file(out / "report.json", fill_report_json(r, cfg));
  if (a.dump_mesh && r.mesh) write_obj(*r.mesh, out / "mesh.obj");
  if (a.debug_overlays) write_debug_overlays(in, r, out / "debug");
  if (r.degraded) {
    std::cerr << "geofill: degraded result: " << r.degraded_reason << '\n';
    return kExitDegraded;
  }
  return kExitOk;
}

struct SynthArgs {
  SynthOptions opt;
  bool no_heightfield = false;
  std::string out;
};

int run_synth_command(SynthArgs a) {
  if (a.no_heightfield) a.opt.scene.heightfield = false;
  const SceneBundle b = make_bundle(a.opt);
  write_bundle(b, a.out);
  return kExitOk;
}

struct EvalArgs {
  Overrides overrides;
  std::vector<std::string> bundles;
  std::string out;
  std::string protocols = "pose,depth,fill";
};

int run_eval_command(const EvalArgs& a) {
  const PipelineConfig cfg = a.overrides.resolve();
  EvalProtocols p{false, false, false};
  std::stringstream ss(a.protocols);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "pose") {
      p.pose = true;
    } else if (item == "depth") {
      p.depth = true;
    } else if (item == "fill") {
      p.fill = true;
    } else {
      throw PreconditionError("unknown protocol \"" + item + "\" (pose, depth, fill)");
    }
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  std::vector<SceneEvaluation> rows;
  bool any_failed = false;
  for (const auto& dir : a.bundles) {
    const fs::path path(dir);
    const SceneBundle b = read_bundle(path);
    std::string name = path.filename().string();
    if (name.empty()) name = path.parent_path().filename().string();
    SceneEvaluation e = evaluate_bundle(b, name, cfg, p);
    write_text_file(out / (name + ".json"), evaluation_json(e));
    any_failed = any_failed || !e.error.empty() || e.degraded;
    rows.push_back(std::move(e));
  }
  write_text_file(out / "metrics.csv", evaluation_csv(rows));
  return any_failed ? kExitDegraded : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-aware image hole filling from a second view"};
  app.require_subcommand(1);

  FillArgs fill;
  CLI::App* fill_cmd = app.add_subcommand("fill", "Fill the target's hole from the source view");
  fill.overrides.add_to(fill_cmd);
  fill_cmd->add_option("--bundle", fill.bundle, "Read inputs from a synth bundle directory")
      ->check(CLI::ExistingDirectory);
  fill_cmd->add_option("--target", fill.target, "Target PNG");
  fill_cmd->add_option("--mask", fill.mask, "Mask PNG (white = known, black = hole)");
  fill_cmd->add_option("--source", fill.source, "Source PNG");
  fill_cmd->add_option("--depth", fill.depth, "Source depth PFM");
  fill_cmd->add_option("--correspondences", fill.correspondences, "CSV xs,ys,xt,yt");
  fill_cmd->add_option("--fallback", fill.fallback, "Fallback fill PNG");
  fill_cmd->add_option("--out", fill.out, "Output directory")->required();
  fill_cmd->add_flag("--debug-overlays", fill.debug_overlays, "Write diagnostic PNGs to out/debug");
  fill_cmd->add_flag("--dump-mesh", fill.dump_mesh, "Write the source mesh to out/mesh.obj");

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write a synthetic two-view scene bundle");
  synth_cmd->add_option("--seed", synth.opt.seed, "Master seed");
  synth_cmd->add_option("--width", synth.opt.scene.width, "Image width");
  synth_cmd->add_option("--height", synth.opt.scene.height, "Image height");
  synth_cmd->add_option("--focal", synth.opt.scene.focal, "Focal length (0 = 0.8 * width)");
  synth_cmd->add_option("--planes", synth.opt.scene.n_planes, "Planar surfaces (2-6)");
  synth_cmd->add_flag("--no-heightfield", synth.no_heightfield, "Flat floor");
  synth_cmd->add_option("--baseline", synth.opt.scene.baseline, "Camera baseline");
  synth_cmd->add_option("--rotation", synth.opt.scene.rotation_deg, "Relative rotation in degrees");
  synth_cmd->add_option("--texture-freq", synth.opt.scene.texture_freq, "Texture cycles per unit");
  synth_cmd->add_option("--correspondences", synth.opt.correspondences, "Correspondence count");
  synth_cmd->add_option("--noise", synth.opt.noise_px, "Correspondence noise in pixels");
  synth_cmd->add_option("--outliers", synth.opt.outlier_frac, "Outlier fraction");
  synth_cmd->add_option("--strokes", synth.opt.n_strokes, "Brush strokes in the mask");
  synth_cmd->add_option("--stroke-width", synth.opt.stroke_width, "Brush width in pixels");
  synth_cmd->add_option("--max-hidden-hole", synth.opt.max_hidden_hole,
                        "Largest hole fraction allowed to be hidden from the source");
  synth_cmd->add_option("--depth-scale", synth.opt.depth.scale, "Affine scale of the depth");
  synth_cmd->add_option("--depth-offset", synth.opt.depth.offset, "Affine offset of the depth");
  synth_cmd->add_option("--depth-noise", synth.opt.depth.noise_sigma, "Relative depth noise");
  synth_cmd->add_option("--depth-blur", synth.opt.depth.blur_radius, "Depth box blur radius");
  synth_cmd->add_option("--out", synth.out, "Bundle directory")->required();

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score bundles against their ground truth");
  eval.overrides.add_to(eval_cmd);
  eval_cmd->add_option("bundles", eval.bundles, "Bundle directories")->required();
  eval_cmd->add_option("--out", eval.out, "Directory for per-scene JSON and metrics.csv")->required();
  eval_cmd->add_option("--protocols", eval.protocols, "Comma list of pose, depth, fill");

  Overrides config_overrides;
  CLI::App* config_cmd = app.add_subcommand("config", "Print the resolved configuration");
  config_overrides.add_to(config_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*fill_cmd) return run_fill_command(fill);
    if (*synth_cmd) return run_synth_command(synth);
    if (*eval_cmd) return run_eval_command(eval);
    if (*config_cmd) {
      std::cout << config_to_json(config_overrides.resolve());
      return kExitOk;
    }
  } catch (const StageError& e) {
    std::cerr << "geofill: stage " << e.stage() << " failed: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "geofill: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
