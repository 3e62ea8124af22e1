#include <benchmark/benchmark.h>

#include <map>

#include "geofill/bundle.hpp"
#include "geofill/epipolar.hpp"
#include "geofill/error.hpp"
#include "geofill/objective.hpp"
#include "geofill/render.hpp"
#include "geofill/synth.hpp"
#include "geofill/warp.hpp"
#include "geofill/weights.hpp"

namespace geofill {
namespace {

// Scene bundles are cached per width; generation dominates otherwise.
const SceneBundle& bundle(int width) {
  static std::map<int, SceneBundle> cache;
  auto it = cache.find(width);
  if (it != cache.end()) return it->second;
  SynthOptions opt;
  opt.scene.width = width;
  opt.scene.height = width * 3 / 4;
  for (opt.seed = 1;; ++opt.seed) {
    try {
      return cache.emplace(width, make_bundle(opt)).first->second;
    } catch (const DegenerateError&) {
    }
  }
}

ParamVector gt_params(const SceneBundle& b) { return pack_params(b.pose_gt, 2.0, -0.6); }

void BM_ForwardWarp(benchmark::State& state) {
  const SceneBundle& b = bundle(static_cast<int>(state.range(0)));
  const ParamVector p = gt_params(b);
  for (auto _ : state) {
    const ReprojectedCoords coords = reproject_coords(b.intrinsics, p, b.depth);
    benchmark::DoNotOptimize(forward_warp(b.source, coords, b.target.width(), b.target.height()));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b.source.pixel_count()));
}
BENCHMARK(BM_ForwardWarp)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ObjectiveWithGradient(benchmark::State& state) {
  const SceneBundle& b = bundle(static_cast<int>(state.range(0)));
  const WeightMap w = build_weight_map(b.target, b.mask, WeightOptions{});
  ObjectiveOptions opt;
  opt.levels = 4;
  const JointObjective obj(b.source, b.depth, b.target, b.mask, b.intrinsics, b.correspondences, w, opt);
  const ParamVector p = gt_params(b);
  for (auto _ : state) {
    ParamVector g = ParamVector::Zero();
    benchmark::DoNotOptimize(obj.evaluate(p, 0, &g));
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_ObjectiveWithGradient)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Rasterize(benchmark::State& state) {
  const SceneBundle& b = bundle(static_cast<int>(state.range(0)));
  const TexturedMesh mesh = drop_edges(build_mesh(b.source, DepthState{b.depth, 2.0, -0.6}, b.intrinsics), 0.04);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rasterize(mesh, b.pose_gt, b.intrinsics, b.target.width(), b.target.height()));
  }
  state.counters["triangles"] = static_cast<double>(mesh.triangles.size());
}
BENCHMARK(BM_Rasterize)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Ransac(benchmark::State& state) {
  SyntheticScene scene;
  for (std::uint64_t seed = 1;; ++seed) {
    try {
      scene = generate_scene(seed, SceneConfig{});
      break;
    } catch (const DegenerateError&) {
    }
  }
  const LabeledCorrespondences lc =
      sample_correspondences(scene, static_cast<int>(state.range(0)), 0.5, 0.3, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_fundamental_ransac(lc.set, RansacConfig{}));
  }
}
BENCHMARK(BM_Ransac)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace geofill

BENCHMARK_MAIN();
