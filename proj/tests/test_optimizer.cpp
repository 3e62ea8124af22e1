#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "geofill/error.hpp"
#include "geofill/imgproc.hpp"
#include "geofill/metrics.hpp"
#include "geofill/optimizer.hpp"
#include "geofill/synth.hpp"
#include "geofill/warp.hpp"
#include "test_support.hpp"

namespace geofill {
namespace {

using testing::clean_bundle;
using testing::small_bundle;

constexpr ParamMask kScaleOnly = {false, false, false, false, false, false, false, true, false};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(DiffGrad, ConstantGradientTakesHalfAdamStep) {
  ParamVector p = pack_params(RelativePose::identity(), 1.0, 0.0);
  DiffGradState st;
  ParamVector g = ParamVector::Zero();
  g[param::kScale] = 0.3;
  g[param::kOffset] = -2.0;
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  diffgrad_step(p, st, g, lr);
  // Step 1: the friction sees g_prev = 0.
  const double s1 = 1.0 - lr * sigmoid(0.3) * 0.3 / (std::sqrt(0.09) + eps);
  EXPECT_NEAR(p[param::kScale], s1, 1e-15);

  const double before = p[param::kScale];
  diffgrad_step(p, st, g, lr);
  // Step 2 with an unchanged gradient: xi = 0.5; reference Adam step.
  const double m = (1 - b1) * 0.3 * b1 + (1 - b1) * 0.3;
  const double v = ((1 - b2) * 0.09) * b2 + (1 - b2) * 0.09;
  const double m_hat = m / (1 - b1 * b1), v_hat = v / (1 - b2 * b2);
  const double adam = lr * m_hat / (std::sqrt(v_hat) + eps);
  EXPECT_NEAR(before - p[param::kScale], 0.5 * adam, 1e-15);
  EXPECT_EQ(st.step, 2);
  EXPECT_EQ(st.g_prev, g);
}

TEST(DiffGrad, QuadraticFirstStepDescends) {
  ParamVector p = pack_params(RelativePose::identity(), 1.0, 0.0);
  DiffGradState st;
  ParamVector g = ParamVector::Zero();
  g[param::kScale] = 2.0 * p[param::kScale];
  diffgrad_step(p, st, g, 0.01, kScaleOnly);
  EXPECT_LT(p[param::kScale], 1.0);
}

TEST(DiffGrad, QuadraticConvergesWithinBudgetAndMatchesScalarSimulation) {
  ParamVector p = pack_params(RelativePose::identity(), 1.0, 0.0);
  DiffGradState st;
  // Independent scalar simulation of the same rule.
  double th = 1.0, m = 0.0, v = 0.0, gp = 0.0;
  int converged_at = -1;
  for (int k = 1; k <= 5000; ++k) {
    ParamVector g = ParamVector::Zero();
    g[param::kScale] = 2.0 * p[param::kScale];
    diffgrad_step(p, st, g, 0.01, kScaleOnly);

    const double gs = 2.0 * th;
    m = 0.9 * m + 0.1 * gs;
    v = 0.999 * v + 0.001 * gs * gs;
    const double xi = sigmoid(std::abs(gp - gs));
    th -= 0.01 * xi * (m / (1 - std::pow(0.9, k))) / (std::sqrt(v / (1 - std::pow(0.999, k))) + 1e-8);
    gp = gs;
    ASSERT_NEAR(p[param::kScale], th, 1e-12) << "step " << k;
    if (converged_at < 0 && std::abs(th) < 1e-3) converged_at = k;
  }
  EXPECT_GT(converged_at, 0);
  EXPECT_LT(std::abs(p[param::kScale]), 1e-3);
}

TEST(DiffGrad, MaskedParametersUntouchedAndQuaternionRenormalized) {
  ParamVector p = pack_params(RelativePose::identity(), 1.0, 0.0);
  DiffGradState st;
  ParamVector g;
  g << 0.1, 0.5, -0.5, 0.2, 1.0, 1.0, 1.0, 1.0, 1.0;
  diffgrad_step(p, st, g, 0.05, kPoseParams);
  EXPECT_EQ(p[param::kScale], 1.0);
  EXPECT_EQ(p[param::kOffset], 0.0);
  EXPECT_NEAR(p.segment<4>(0).norm(), 1.0, 1e-12);
  EXPECT_EQ(st.m[param::kScale], 0.0);
  EXPECT_EQ(st.v[param::kOffset], 0.0);
}

TEST(DiffGrad, NonFiniteGradientRejectedWithoutSideEffects) {
  ParamVector p = pack_params(RelativePose::identity(), 1.0, 0.0);
  DiffGradState st;
  ParamVector g = ParamVector::Zero();
  g[3] = std::nan("");
  const ParamVector before = p;
  EXPECT_THROW(diffgrad_step(p, st, g, 0.01), DegenerateError);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step, 0);
}

TEST(Convergence, InsufficientHistory) {
  EXPECT_FALSE(check_convergence({1, 1, 1, 1, 1, 1, 1, 1, 1}, 10, 1e-6));
  EXPECT_FALSE(convergence_epsilon({1, 1, 1}, 10).has_value());
}

TEST(Convergence, ConstantSequence) {
  const std::vector<double> h(10, 0.37);
  EXPECT_EQ(convergence_epsilon(h, 10).value(), 0.0);
  EXPECT_TRUE(check_convergence(h, 10, 1e-6));
}

TEST(Convergence, GeometricDecayHandComputed) {
  std::vector<double> h;
  for (int k = 0; k < 10; ++k) h.push_back(std::pow(0.9, k));
  double older = 0.0, recent = 0.0;
  for (int k = 0; k < 5; ++k) older += h[k];
  for (int k = 5; k < 10; ++k) recent += h[k];
  const double oracle = std::abs(recent - older) / recent;
  EXPECT_NEAR(convergence_epsilon(h, 10).value(), oracle, 1e-12);
  EXPECT_NEAR(oracle, std::pow(0.9, -5) - 1.0, 1e-12);
  EXPECT_FALSE(check_convergence(h, 10, 1e-6));
}

TEST(Convergence, UsesOnlyTheLastWindow) {
  std::vector<double> h = {100.0, 50.0, 7.0};
  for (int k = 0; k < 10; ++k) h.push_back(2.0);
  EXPECT_EQ(convergence_epsilon(h, 10).value(), 0.0);
}

TEST(ScheduleTest, DefaultCapsAndValidation) {
  EXPECT_EQ(Schedule::default_caps(4, 10000), (std::vector<int>{4000, 7000, 9000, 10000}));
  EXPECT_EQ(Schedule::default_caps(1, 50), (std::vector<int>{50}));
  const auto caps = Schedule::default_caps(3, 7);
  EXPECT_EQ(caps.back(), 7);
  for (std::size_t i = 1; i < caps.size(); ++i) EXPECT_GT(caps[i], caps[i - 1]);
  Schedule s;
  EXPECT_NO_THROW(s.validate());
  s.level_caps = {10, 10, 20, 30};
  EXPECT_THROW(s.validate(), PreconditionError);
  s.level_caps = {10, 20, 30};
  EXPECT_THROW(s.validate(), PreconditionError);
}

struct Problem {
  SceneBundle b;
  WeightMap weights;
  ObjectiveOptions options;
};

Problem make_setup(std::uint64_t seed, int w = 128, int h = 96, int levels = 3, bool clean = false) {
  Problem s{clean ? clean_bundle(seed, w, h) : small_bundle(seed, w, h), {}, {}};
  s.weights = build_weight_map(s.b.target, s.b.mask, WeightOptions{});
  s.options.levels = levels;
  return s;
}

JointObjective objective_of(const Problem& s, const Image& depth) {
  return JointObjective(s.b.source, depth, s.b.target, s.b.mask, s.b.intrinsics, s.b.correspondences,
                        s.weights, s.options);
}

Schedule schedule_of(int levels, int max_iters) {
  Schedule sc;
  sc.levels = levels;
  sc.level_caps = Schedule::default_caps(levels, max_iters);
  return sc;
}

// The bundle's depth is 0.5 * gt + 0.3, so the exact correction is s = 2, b = -0.6.
constexpr double kGtScale = 2.0;
constexpr double kGtOffset = -0.6;

// Scaling depth and translation together leaves every loss term except the
// depth hinge unchanged, so depth scale is compared after removing the
// translation-norm gauge: median of (s * raw + b) * |t_gt| / |t| / depth_gt.
double gauge_free_scale_ratio(const ParamVector& p, const SceneBundle& b) {
  const double k = b.pose_gt.translation.norm() / p.segment<3>(param::kTrans).norm();
  std::vector<double> ratios;
  for (int y = 0; y < b.depth.height(); ++y) {
    for (int x = 0; x < b.depth.width(); ++x) {
      const double d = p[param::kScale] * b.depth.at(x, y) + p[param::kOffset];
      ratios.push_back(k * d / b.depth_gt.at(x, y));
    }
  }
  return percentile(ratios, 50.0);
}

// Mean target-frame displacement of every source pixel between two parameter sets.
double mean_reprojection_shift(const ParamVector& a, const ParamVector& b, const SceneBundle& bundle) {
  const auto ca = reproject_coords(bundle.intrinsics, a, bundle.depth);
  const auto cb = reproject_coords(bundle.intrinsics, b, bundle.depth);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ca.u.size(); ++i) {
    if (!ca.valid[i] || !cb.valid[i]) continue;
    sum += std::hypot(ca.u[i] - cb.u[i], ca.v[i] - cb.v[i]);
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : std::numeric_limits<double>::infinity();
}

TEST(OptimizeJoint, GroundTruthInitStaysPut) {
  const Problem s = make_setup(1, 256, 192, 3, /*clean=*/true);
  const JointObjective obj = objective_of(s, s.b.depth);
  const ParamVector init = pack_params(s.b.pose_gt, kGtScale, kGtOffset);
  const auto r = optimize_joint(init, obj, schedule_of(3, 600));
  EXPECT_FALSE(r.degraded);
  EXPECT_LE(r.final_loss.total, r.initial_loss.total);
  // Splat blur leaves a sub-pixel bias in the photometric optimum, so "stays
  // put" is judged on the warp field rather than on raw parameters.
  EXPECT_LT(mean_reprojection_shift(r.params, init, s.b), 0.5);
  const double pixel_deg = std::atan(1.0 / s.b.intrinsics.fx) * 180.0 / std::numbers::pi;
  EXPECT_LT(pose_error(unpack_pose(r.params), s.b.pose_gt).rotation_deg, pixel_deg);
}

TEST(OptimizeJoint, RecoversPerturbedPoseAndScale) {
  const Problem s = make_setup(2, 256, 192, 3, /*clean=*/true);
  const JointObjective obj = objective_of(s, s.b.depth);
  RelativePose init_pose = s.b.pose_gt;
  init_pose.rotation = quaternion_multiply(
      axis_angle_quaternion(Vec3(0.3, 1.0, 0.1).normalized(), 5.0 * std::numbers::pi / 180.0), init_pose.rotation);
  const ParamVector init = pack_params(init_pose, 1.3 * kGtScale, 1.3 * kGtOffset);
  ASSERT_NEAR(pose_error(init_pose, s.b.pose_gt).rotation_deg, 5.0, 1e-6);
  ASSERT_NEAR(gauge_free_scale_ratio(init, s.b), 1.3, 1e-3);
  const auto r = optimize_joint(init, obj, schedule_of(3, 2000));
  EXPECT_FALSE(r.degraded) << r.degraded_reason;
  EXPECT_LT(pose_error(unpack_pose(r.params), s.b.pose_gt).rotation_deg, 0.5);
  EXPECT_LT(std::abs(gauge_free_scale_ratio(r.params, s.b) - 1.0), 0.02);
}

TEST(OptimizeJoint, NoisyDepthStrictlyImproves) {
  const Problem s = make_setup(3);
  const Image noisy = perturb_depth(s.b.depth, DepthPerturbation{1.0, 0.0, 0.02, 0, 77});
  const JointObjective obj = objective_of(s, noisy);
  RelativePose init_pose = s.b.pose_gt;
  init_pose.rotation = quaternion_multiply(axis_angle_quaternion(Vec3::UnitY(), 0.03), init_pose.rotation);
  const auto r = optimize_joint(pack_params(init_pose, 1.1 * kGtScale, kGtOffset), obj, schedule_of(3, 600));
  EXPECT_LT(r.final_loss.total, r.initial_loss.total);
}

TEST(OptimizeJoint, TraceInvariants) {
  const Problem s = make_setup(4);
  const JointObjective obj = objective_of(s, s.b.depth);
  RelativePose init_pose = s.b.pose_gt;
  init_pose.rotation = quaternion_multiply(axis_angle_quaternion(Vec3::UnitY(), 0.04), init_pose.rotation);
  const ParamVector init = pack_params(init_pose, 1.2 * kGtScale, kGtOffset);
  std::vector<TraceEntry> streamed;
  const Schedule sc = schedule_of(3, 450);
  const auto r = optimize_joint(init, obj, sc, kAllParams, [&](const TraceEntry& e) { streamed.push_back(e); });
  ASSERT_EQ(r.levels.size(), 3u);
  ASSERT_EQ(streamed.size(), r.trace.size());
  EXPECT_EQ(static_cast<int>(r.trace.size()), r.iterations);
  EXPECT_LE(r.iterations, sc.level_caps.back());

  // Levels run coarse to fine; the running best never increases within a level.
  int expected_iter = 0;
  std::size_t pos = 0;
  for (std::size_t li = 0; li < r.levels.size(); ++li) {
    const auto& lv = r.levels[li];
    EXPECT_EQ(lv.level, 2 - static_cast<int>(li));
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < lv.iterations; ++k, ++pos) {
      const auto& e = r.trace[pos];
      EXPECT_EQ(e.iteration, expected_iter++);
      EXPECT_EQ(e.level, lv.level);
      best = std::min(best, e.loss.total);
    }
    EXPECT_EQ(best, lv.best_loss);
    EXPECT_LE(expected_iter, sc.level_caps[li]);
  }

  // Handoff: each level starts from the previous level's argmin.
  for (std::size_t li = 1; li < r.levels.size(); ++li) {
    std::size_t first = 0;
    for (std::size_t k = 0; k < li; ++k) first += static_cast<std::size_t>(r.levels[k].iterations);
    const double at_handoff = obj.evaluate(r.levels[li - 1].best_params, r.levels[li].level).total;
    EXPECT_EQ(r.trace[first].loss.total, at_handoff);
  }
  EXPECT_EQ(r.params, r.levels.back().best_params);
  EXPECT_NEAR(r.params.segment<4>(0).norm(), 1.0, 1e-9);
  EXPECT_EQ(r.final_loss.total, r.levels.back().best_loss);
}

TEST(OptimizeJoint, BitwiseDeterministic) {
  const Problem s = make_setup(5, 96, 72, 2);
  const JointObjective obj = objective_of(s, s.b.depth);
  const ParamVector init = pack_params(s.b.pose_gt, 1.1 * kGtScale, kGtOffset);
  const auto a = optimize_joint(init, obj, schedule_of(2, 200));
  const auto b = optimize_joint(init, obj, schedule_of(2, 200));
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].loss.total, b.trace[i].loss.total);
  EXPECT_EQ(a.params, b.params);
}

TEST(OptimizeJoint, PoseMaskKeepsDepthFixed) {
  const Problem s = make_setup(6, 96, 72, 2);
  const JointObjective obj = objective_of(s, s.b.depth);
  const ParamVector init = pack_params(s.b.pose_gt, 1.1 * kGtScale, kGtOffset);
  const auto r = optimize_joint(init, obj, schedule_of(2, 100), kPoseParams);
  EXPECT_EQ(r.params[param::kScale], init[param::kScale]);
  EXPECT_EQ(r.params[param::kOffset], init[param::kOffset]);
}

TEST(OptimizeJoint, ObjectiveFailureDegrades) {
  const Problem s = make_setup(7, 96, 72, 2);
  const JointObjective obj = objective_of(s, s.b.depth);
  const ParamVector init = pack_params(s.b.pose_gt, 1.0, -1e4);  // no feature has positive depth
  OptimizeResult r;
  ASSERT_NO_THROW(r = optimize_joint(init, obj, schedule_of(2, 100)));
  EXPECT_TRUE(r.degraded);
  EXPECT_FALSE(r.degraded_reason.empty());
  EXPECT_EQ(r.params, init);
}

TEST(OptimizeJoint, ScheduleMustMatchObjectiveLevels) {
  const Problem s = make_setup(8, 96, 72, 2);
  const JointObjective obj = objective_of(s, s.b.depth);
  EXPECT_THROW(optimize_joint(pack_params(s.b.pose_gt, kGtScale, kGtOffset), obj, schedule_of(3, 100)),
               PreconditionError);
}

}  // namespace
}  // namespace geofill
