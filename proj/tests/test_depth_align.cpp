#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "geofill/depth_align.hpp"
#include "geofill/error.hpp"
#include "geofill/rng.hpp"

namespace geofill {
namespace {

// Raw depth laid out on a row so sample i sits exactly on pixel (i, 0).
Image row_image(const std::vector<double>& values) {
  Image img(static_cast<int>(values.size()), 1, 1);
  for (std::size_t i = 0; i < values.size(); ++i) img.at(static_cast<int>(i), 0) = static_cast<float>(values[i]);
  return img;
}

SparseDepthMap samples_on_row(const std::vector<double>& targets) {
  SparseDepthMap s;
  for (std::size_t i = 0; i < targets.size(); ++i) s.samples.push_back({static_cast<double>(i), 0.0, targets[i], 0.0});
  return s;
}

double sum_sq(const Image& raw, const SparseDepthMap& s, double a, double b) {
  double acc = 0.0;
  for (const auto& p : s.samples) {
    const double r = a * raw.sample_bilinear(p.x, p.y) + b - p.depth;
    acc += r * r;
  }
  return acc;
}

TEST(FitScaleOffset, ExactLinearRelation) {
  const auto fit = fit_scale_offset(row_image({1, 2, 3}), samples_on_row({3, 5, 7}));
  EXPECT_NEAR(fit.scale, 2.0, 1e-12);
  EXPECT_NEAR(fit.offset, 1.0, 1e-12);
  EXPECT_EQ(fit.samples_used, 3u);
}

TEST(FitScaleOffset, ConstantRawIsDegenerate) {
  EXPECT_THROW(fit_scale_offset(row_image({1, 1, 1, 1}), samples_on_row({1, 2, 3, 4})), DegenerateError);
}

TEST(FitScaleOffset, NeedsTwoSamples) {
  EXPECT_THROW(fit_scale_offset(row_image({1, 2}), samples_on_row({3})), PreconditionError);
}

TEST(FitScaleOffset, NoisyFitMatchesNormalEquationsAndStandardError) {
  Rng rng(17);
  const int n = 100;
  const double sigma = 0.01;
  std::vector<double> raw(n), target(n);
  for (int i = 0; i < n; ++i) {
    raw[i] = rng.uniform(1.0, 5.0);
    target[i] = 1.5 * raw[i] + 0.2 + sigma * rng.normal();
  }
  const Image img = row_image(raw);
  const auto fit = fit_scale_offset(img, samples_on_row(target));

  Eigen::Matrix<double, Eigen::Dynamic, 2> a(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    a(i, 0) = img.at(i, 0);  // the float-stored raw value
    a(i, 1) = 1.0;
    y(i) = target[i];
  }
  const Eigen::Vector2d sol = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  EXPECT_NEAR(fit.scale, sol(0), 1e-9);
  EXPECT_NEAR(fit.offset, sol(1), 1e-9);

  const double mean = a.col(0).mean();
  const double sxx = (a.col(0).array() - mean).square().sum();
  const double se_s = sigma / std::sqrt(sxx);
  const double se_b = sigma * std::sqrt(1.0 / n + mean * mean / sxx);
  EXPECT_LT(std::abs(fit.scale - 1.5), 3 * se_s);
  EXPECT_LT(std::abs(fit.offset - 0.2), 3 * se_b);
}

TEST(FitScaleOffset, ResidualOptimality) {
  Rng rng(3);
  std::vector<double> raw(40), target(40);
  for (int i = 0; i < 40; ++i) {
    raw[i] = rng.uniform(0.5, 3.0);
    target[i] = 0.7 * raw[i] - 0.4 + 0.05 * rng.normal();
  }
  const Image img = row_image(raw);
  const auto s = samples_on_row(target);
  const auto fit = fit_scale_offset(img, s);
  const double best = sum_sq(img, s, fit.scale, fit.offset);
  for (int da = -1; da <= 1; ++da) {
    for (int db = -1; db <= 1; ++db) {
      if (da == 0 && db == 0) continue;
      EXPECT_GE(sum_sq(img, s, fit.scale + 1e-3 * da, fit.offset + 1e-3 * db), best);
    }
  }
}

TEST(FitScaleOffset, EquivariantUnderTargetScaling) {
  Rng rng(5);
  std::vector<double> raw(30), target(30), scaled(30);
  const double k = 3.7;
  for (int i = 0; i < 30; ++i) {
    raw[i] = rng.uniform(1.0, 4.0);
    target[i] = 2.1 * raw[i] + 0.3 + 0.02 * rng.normal();
    scaled[i] = k * target[i];
  }
  const Image img = row_image(raw);
  const auto a = fit_scale_offset(img, samples_on_row(target));
  const auto b = fit_scale_offset(img, samples_on_row(scaled));
  EXPECT_NEAR(b.scale, k * a.scale, 1e-9);
  EXPECT_NEAR(b.offset, k * a.offset, 1e-9);
}

TEST(FitScaleOffset, DropsHighResidualSamples) {
  // Ten samples; the worst-residual one is far off the line and must be dropped.
  std::vector<double> raw, target;
  for (int i = 0; i < 10; ++i) {
    raw.push_back(1.0 + i);
    target.push_back(2.0 * (1.0 + i) + 1.0);
  }
  target[4] = 100.0;
  auto s = samples_on_row(target);
  for (auto& p : s.samples) p.residual = 0.01;
  s.samples[4].residual = 5.0;
  const auto fit = fit_scale_offset(row_image(raw), s);
  EXPECT_EQ(fit.samples_used, 9u);
  EXPECT_NEAR(fit.scale, 2.0, 1e-12);
  EXPECT_NEAR(fit.offset, 1.0, 1e-12);
}

TEST(FitScaleOffset, BilinearLookupBetweenPixels) {
  Image raw(2, 1, 1);
  raw.at(0, 0) = 1.0f;
  raw.at(1, 0) = 3.0f;
  SparseDepthMap s;
  s.samples.push_back({0.0, 0.0, 1.0, 0.0});
  s.samples.push_back({0.5, 0.0, 2.0, 0.0});  // raw 2 by interpolation
  s.samples.push_back({1.0, 0.0, 3.0, 0.0});
  const auto fit = fit_scale_offset(raw, s);
  EXPECT_NEAR(fit.scale, 1.0, 1e-12);
  EXPECT_NEAR(fit.offset, 0.0, 1e-12);
}

}  // namespace
}  // namespace geofill
