#include "geofill/epipolar.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "geofill/error.hpp"
#include "geofill/rng.hpp"

namespace geofill {

namespace {

constexpr double kMinRayAngle = 1e-6;
constexpr int kMaxRefits = 10;
constexpr int kSampsonRounds = 5;
constexpr int kInnerSamples = 10;
constexpr std::size_t kInnerSubset = 24;

Mat3 hartley_normalizer(std::span<const Vec2> pts) {
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Mat3 t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

Mat3 canonical_sign(Mat3 f) {
  f /= f.norm();
  Eigen::Index r, c;
  f.cwiseAbs().maxCoeff(&r, &c);
  if (f(r, c) < 0.0) f = -f;
  return f;
}

// Partial Fisher-Yates over a persistent index permutation.
void sample_distinct(Rng& rng, std::vector<std::size_t>& idx, std::array<std::size_t, 8>& out) {
  const std::size_t n = idx.size();
  for (std::size_t i = 0; i < 8; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
    out[i] = idx[i];
  }
}

std::size_t count_inliers(const FundamentalMatrix& f, const CorrespondenceSet& corr,
                          double threshold, std::vector<bool>* flags) {
  std::size_t count = 0;
  if (flags) flags->assign(corr.size(), false);
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (sampson_distance(f, corr.pairs[i]) <= threshold) {
      ++count;
      if (flags) (*flags)[i] = true;
    }
  }
  return count;
}

}  // namespace

namespace {

// Normalized 8-point fit with per-pair row weights (all 1 when empty).
FundamentalMatrix fit_weighted(std::span<const Correspondence> pairs, std::span<const double> weights) {
  std::vector<Vec2> ps, pt;
  ps.reserve(pairs.size());
  pt.reserve(pairs.size());
  for (const auto& c : pairs) {
    ps.emplace_back(c.xs, c.ys);
    pt.emplace_back(c.xt, c.yt);
  }
  const Mat3 ts = hartley_normalizer(ps);
  const Mat3 tt = hartley_normalizer(pt);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(pairs.size()), 9);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vec3 s = ts * Vec3(ps[i].x(), ps[i].y(), 1.0);
    const Vec3 t = tt * Vec3(pt[i].x(), pt[i].y(), 1.0);
    a.row(static_cast<Eigen::Index>(i)) << t.x() * s.x(), t.x() * s.y(), t.x(), t.y() * s.x(),
        t.y() * s.y(), t.y(), s.x(), s.y(), 1.0;
    if (!weights.empty()) a.row(static_cast<Eigen::Index>(i)) *= std::sqrt(weights[i]);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd v = svd.matrixV().col(8);
  Mat3 fn;
  fn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  Eigen::JacobiSVD<Mat3> svd3(fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 sv = svd3.singularValues();
  sv(2) = 0.0;
  fn = svd3.matrixU() * sv.asDiagonal() * svd3.matrixV().transpose();
  return {canonical_sign(tt.transpose() * fn * ts)};
}

// Iteratively reweighted fit whose weights turn the algebraic residual into
// the Sampson distance of the previous estimate.
FundamentalMatrix fit_sampson(std::span<const Correspondence> pairs, FundamentalMatrix f) {
  std::vector<double> w(pairs.size());
  for (int round = 0; round < kSampsonRounds; ++round) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Correspondence& c = pairs[i];
      const Vec3 fx = f.f * Vec3(c.xs, c.ys, 1.0);
      const Vec3 ftx = f.f.transpose() * Vec3(c.xt, c.yt, 1.0);
      const double denom = fx.head<2>().squaredNorm() + ftx.head<2>().squaredNorm();
      w[i] = denom > 0.0 ? 1.0 / denom : 0.0;
    }
    double total = 0.0;
    for (double v : w) total += v;
    if (!(total > 0.0) || !std::isfinite(total)) break;
    for (double& v : w) v /= total;
    const FundamentalMatrix next = fit_weighted(pairs, w);
    if (!next.f.allFinite()) break;
    f = next;
  }
  return f;
}

std::vector<Correspondence> flagged(const CorrespondenceSet& corr, const std::vector<bool>& flags) {
  std::vector<Correspondence> pairs;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (flags[i]) pairs.push_back(corr.pairs[i]);
  }
  return pairs;
}

// Refits on the inlier set of `out` until it stops changing; a refit that
// loses inliers is rejected. Returns the final inlier count.
std::size_t iterate_refit(const CorrespondenceSet& corr, double threshold, FundamentalEstimate& out) {
  std::size_t count = count_inliers(out.fundamental, corr, threshold, &out.inliers);
  for (int round = 0; round < kMaxRefits && count >= 8; ++round) {
    const FundamentalMatrix refit = fit_sampson(flagged(corr, out.inliers), out.fundamental);
    if (!refit.f.allFinite()) break;
    std::vector<bool> flags;
    const std::size_t refit_count = count_inliers(refit, corr, threshold, &flags);
    if (refit_count < count) break;
    const bool stable = flags == out.inliers;
    out.fundamental = refit;
    out.inliers = std::move(flags);
    count = refit_count;
    if (stable) break;
  }
  return count;
}

// Local optimization of a new best hypothesis: iterated refits from `f` and
// from kInnerSamples non-minimal subsets of its inliers. Returns the best
// inlier count found.
std::size_t refine_on_inliers(const CorrespondenceSet& corr, const FundamentalMatrix& f, double threshold,
                              Rng& rng, FundamentalEstimate& out) {
  out.fundamental = f;
  std::size_t best = iterate_refit(corr, threshold, out);
  const std::vector<bool> seed_flags = out.inliers;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (seed_flags[i]) pool.push_back(i);
  }
  const std::size_t subset = std::min(kInnerSubset, pool.size() / 2);
  if (subset < 8) return best;
  std::vector<Correspondence> pairs(subset);
  for (int r = 0; r < kInnerSamples; ++r) {
    for (std::size_t i = 0; i < subset; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      pairs[i] = corr.pairs[pool[i]];
    }
    FundamentalEstimate trial;
    trial.fundamental = fit_fundamental_8point(pairs);
    if (!trial.fundamental.f.allFinite()) continue;
    const std::size_t count = iterate_refit(corr, threshold, trial);
    if (count > best) {
      best = count;
      out = std::move(trial);
    }
  }
  return best;
}

}  // namespace

FundamentalMatrix fit_fundamental_8point(std::span<const Correspondence> pairs) {
  if (pairs.size() < 8) {
    throw PreconditionError("8-point fit needs >= 8 pairs, got " + std::to_string(pairs.size()));
  }
  return fit_weighted(pairs, {});
}

double sampson_distance(const FundamentalMatrix& f, const Correspondence& c) {
  const Vec3 xs(c.xs, c.ys, 1.0);
  const Vec3 xt(c.xt, c.yt, 1.0);
  const Vec3 fx = f.f * xs;
  const Vec3 ftx = f.f.transpose() * xt;
  const double e = xt.dot(fx);
  const double denom = fx.x() * fx.x() + fx.y() * fx.y() + ftx.x() * ftx.x() + ftx.y() * ftx.y();
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return std::abs(e) / std::sqrt(denom);
}

FundamentalEstimate estimate_fundamental_ransac(const CorrespondenceSet& corr,
                                                const RansacConfig& cfg) {
  const std::size_t n = corr.size();
  if (n < 8) {
    throw PreconditionError("fundamental estimation needs >= 8 correspondences, got " +
                            std::to_string(n));
  }
  Rng rng(cfg.seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  // Each new best hypothesis is refined on its inliers before it is scored,
  // so the adaptive exit sees the refined inlier ratio.
  FundamentalEstimate best;
  std::size_t best_count = 0;
  int needed = cfg.max_iters;
  int iter = 0;
  std::array<std::size_t, 8> sample{};
  std::array<Correspondence, 8> minimal{};
  for (; iter < needed; ++iter) {
    sample_distinct(rng, idx, sample);
    for (int k = 0; k < 8; ++k) minimal[k] = corr.pairs[sample[k]];
    FundamentalMatrix f;
    try {
      f = fit_fundamental_8point(minimal);
    } catch (const Error&) {
      continue;
    }
    if (!f.f.allFinite()) continue;
    if (count_inliers(f, corr, cfg.threshold_px, nullptr) <= best_count) continue;
    FundamentalEstimate local;
    const std::size_t count = refine_on_inliers(corr, f, cfg.threshold_px, rng, local);
    if (count <= best_count) continue;
    best_count = count;
    best = std::move(local);
    const double w = static_cast<double>(count) / static_cast<double>(n);
    const double p_fail = 1.0 - std::pow(w, 8.0);
    if (p_fail <= 0.0) {
      needed = std::min(needed, iter + 1);
    } else if (p_fail < 1.0) {
      const double k = std::log(1.0 - cfg.confidence) / std::log(p_fail);
      if (k < static_cast<double>(needed)) needed = std::max(iter + 1, static_cast<int>(std::ceil(k)));
    }
  }
  if (best_count < 8) {
    throw DegenerateError("RANSAC found no fundamental matrix with >= 8 inliers (best " +
                          std::to_string(best_count) + ")");
  }
  FundamentalEstimate& out = best;
  out.iterations = iter;
  return out;
}

FundamentalMatrix fundamental_from_pose(const RelativePose& pose, const CameraIntrinsics& k) {
  const Vec3& t = pose.translation;
  Mat3 tx;
  tx << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
  const Mat3 e = tx * pose.rotation_matrix();
  const Mat3 kinv = k.inverse();
  return {canonical_sign(kinv.transpose() * e * kinv)};
}

RelativePose decompose_pose(const FundamentalMatrix& f, const CameraIntrinsics& k,
                            const CorrespondenceSet& inliers) {
  if (inliers.inlier_count() == 0) {
    throw PreconditionError("pose decomposition needs >= 1 inlier for the cheirality test");
  }
  const Mat3 km = k.matrix();
  const Mat3 e = km.transpose() * f.f * km;
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) < 1e-8 * sv(0)) {
    throw DegenerateError("essential matrix has near-zero translation");
  }
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if (u.determinant() < 0) u.col(2) *= -1.0;
  if (v.determinant() < 0) v.col(2) *= -1.0;
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const std::array<Mat3, 2> rotations = {u * w * v.transpose(), u * w.transpose() * v.transpose()};
  const Vec3 t = u.col(2).normalized();

  std::array<RelativePose, 4> candidates;
  std::array<std::size_t, 4> votes{};
  for (int r = 0; r < 2; ++r) {
    for (int s = 0; s < 2; ++s) {
      const RelativePose cand = RelativePose::from_rt(rotations[r], s == 0 ? t : Vec3(-t));
      const int ci = 2 * r + s;
      candidates[ci] = cand;
      for (std::size_t i = 0; i < inliers.size(); ++i) {
        if (!inliers.inliers[i]) continue;
        const auto& c = inliers.pairs[i];
        try {
          if (triangulate({c.xs, c.ys}, {c.xt, c.yt}, cand, k).in_front) ++votes[ci];
        } catch (const DegenerateError&) {
        }
      }
    }
  }
  std::array<int, 4> order = {0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return votes[a] > votes[b]; });
  if (votes[order[0]] == 0) {
    throw DegenerateError("cheirality: no pose candidate places points in front of both cameras");
  }
  if (votes[order[0]] == votes[order[1]]) {
    throw DegenerateError("cheirality: two pose candidates tie with " +
                          std::to_string(votes[order[0]]) + " points in front");
  }
  RelativePose best = candidates[order[0]];
  best.canonicalize();
  return best;
}

TriangulatedPoint triangulate(const Vec2& q_s, const Vec2& q_t, const RelativePose& pose,
                              const CameraIntrinsics& k) {
  const Mat3 rt = pose.rotation_matrix().transpose();
  const Vec3 ds = k.ray(q_s.x(), q_s.y());
  const Vec3 dt = rt * k.ray(q_t.x(), q_t.y());
  const Vec3 ot = -rt * pose.translation;

  const double a = ds.dot(ds), b = ds.dot(dt), c = dt.dot(dt);
  const Vec3 w0 = -ot;
  const double d = ds.dot(w0), e = dt.dot(w0);
  const double denom = a * c - b * b;
  const double sin2 = denom / (a * c);
  if (!(sin2 > kMinRayAngle * kMinRayAngle)) {
    throw DegenerateError("triangulate: rays are parallel");
  }
  const double lambda = (b * e - c * d) / denom;
  const double mu = (a * e - b * d) / denom;
  const Vec3 ps = lambda * ds;
  const Vec3 pt = ot + mu * dt;

  TriangulatedPoint out;
  out.point = 0.5 * (ps + pt);
  out.residual = 0.5 * (ps - pt).norm();
  out.in_front = out.point.z() > 0.0 && pose.transform(out.point).z() > 0.0;
  return out;
}

Triangulation triangulate_all(const CorrespondenceSet& corr, const RelativePose& pose,
                              const CameraIntrinsics& k) {
  Triangulation out;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    if (!corr.inliers[i]) continue;
    const auto& c = corr.pairs[i];
    TriangulatedPoint tp;
    try {
      tp = triangulate({c.xs, c.ys}, {c.xt, c.yt}, pose, k);
    } catch (const DegenerateError&) {
      continue;
    }
    if (!tp.in_front || !tp.point.allFinite()) continue;
    out.cloud.points.push_back(tp.point);
    out.cloud.residuals.push_back(tp.residual);
    out.cloud.pair_index.push_back(i);
    out.sparse.samples.push_back({c.xs, c.ys, tp.point.z(), tp.residual});
  }
  return out;
}

}  // namespace geofill
