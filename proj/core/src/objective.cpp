#include "geofill/objective.hpp"

#include <algorithm>
#include <cmath>

#include "geofill/error.hpp"
#include "geofill/parallel.hpp"

namespace geofill {

namespace {

constexpr int kRowBlock = 16;
constexpr double kMinNormalizer = 1e-6;

void check_robust_params(double alpha, double c) {
  if (!(c > 0.0)) throw PreconditionError("robust scale must be positive");
  if (alpha == 0.0 || alpha == 2.0) throw PreconditionError("robust shape must not be 0 or 2");
}

}  // namespace

double robust_fn(double x, double alpha, double c) {
  check_robust_params(alpha, c);
  const double a2 = std::abs(alpha - 2.0);
  const double r = (x / c) * (x / c);
  return (a2 / alpha) * (std::pow(r / a2 + 1.0, 0.5 * alpha) - 1.0);
}

double robust_fn_dsq(double x_squared, double alpha, double c) {
  check_robust_params(alpha, c);
  const double a2 = std::abs(alpha - 2.0);
  return 0.5 / (c * c) * std::pow(x_squared / (c * c * a2) + 1.0, 0.5 * alpha - 1.0);
}

std::optional<double> photometric_loss(const WarpResult& warp, const Image& target_rgba,
                                       const Image& w) {
  if (!warp.image.same_dims(target_rgba) || !warp.image.same_dims(w) ||
      target_rgba.channels() != 4 || w.channels() != 1) {
    throw PreconditionError("photometric loss: warp, target (RGBA) and weights must match");
  }
  double sum = 0.0, norm = 0.0;
  for (int y = 0; y < target_rgba.height(); ++y) {
    for (int x = 0; x < target_rgba.width(); ++x) {
      const double c = warp.coverage.at(x, y);
      if (c <= kMinCoverage) continue;
      const float* t = target_rgba.pixel(x, y);
      const double a = t[3];
      double e = 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        const double d = a * warp.image.at(x, y, ch) - t[ch];
        e += d * d;
      }
      sum += w.at(x, y) * c * e;
      norm += a * c;
    }
  }
  if (norm < kMinNormalizer) return std::nullopt;
  return sum / norm;
}

double feature_loss(const std::vector<PointProjection>& projected,
                    const std::vector<Vec2>& target_points, const std::vector<double>& w,
                    double alpha, double c) {
  if (projected.size() != target_points.size() || w.size() != target_points.size()) {
    throw PreconditionError("feature loss: point sets differ in length");
  }
  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < projected.size(); ++i) {
    if (!projected[i].valid) continue;
    sum += w[i] * robust_fn((projected[i].uv - target_points[i]).norm(), alpha, c);
    ++valid;
  }
  if (valid == 0) throw DegenerateError("feature loss: no feature has positive depth");
  return sum / static_cast<double>(valid);
}

double negative_depth_penalty(const DepthState& depth) {
  double sum = 0.0;
  for (float r : depth.raw.data()) {
    const double d = depth.scale * r + depth.offset;
    if (d < 0.0) sum -= d;
  }
  return sum;
}

LossBreakdown total_loss(double photo, double feat, double negd, const LossWeights& lambda) {
  LossBreakdown out;
  out.photo = photo;
  out.feat = feat;
  out.negd = negd;
  out.total = lambda.photo * photo + lambda.feat * feat + lambda.negd * negd;
  return out;
}

FeatureWeighting parse_feature_weighting(const std::string& name) {
  if (name == "full") return FeatureWeighting::kFull;
  if (name == "hole") return FeatureWeighting::kHoleOnly;
  if (name == "uniform") return FeatureWeighting::kUniform;
  throw PreconditionError("unknown feature weighting '" + name + "' (full | hole | uniform)");
}

std::string to_string(FeatureWeighting fw) {
  switch (fw) {
    case FeatureWeighting::kFull:
      return "full";
    case FeatureWeighting::kHoleOnly:
      return "hole";
    case FeatureWeighting::kUniform:
      return "uniform";
  }
  return "full";
}

JointObjective::JointObjective(const Image& source, const Image& raw_depth, const Image& target,
                               const HoleMask& mask, const CameraIntrinsics& k,
                               const CorrespondenceSet& correspondences,
                               const WeightMap& weights, const ObjectiveOptions& options)
    : options_(options), k_(k), raw_full_(raw_depth) {
  if (source.channels() != 3 || target.channels() != 3) {
    throw PreconditionError("objective: source and target must be RGB");
  }
  if (raw_depth.channels() != 1 || !raw_depth.same_dims(source)) {
    throw PreconditionError("objective: raw depth must be 1-channel at source resolution");
  }
  if (mask.width() != target.width() || mask.height() != target.height() ||
      !weights.w.same_dims(target)) {
    throw PreconditionError("objective: mask and weights must match the target");
  }
  check_robust_params(options.robust_alpha, options.robust_scale);
  k.validate(source.width(), source.height());
  const int levels = options.levels;
  if (levels < 1) throw PreconditionError("objective: need >= 1 pyramid level");
  const int min_side = std::min({source.width(), source.height(), target.width(), target.height()});
  if ((min_side >> (levels - 1)) < kMinLevelSize) {
    throw PreconditionError("objective: " + std::to_string(levels) +
                            " pyramid levels leave the coarsest level below " +
                            std::to_string(kMinLevelSize) + " pixels");
  }
  source_ = build_pyramid(source, levels).levels;
  raw_ = build_pyramid(raw_depth, levels).levels;
  target_ = build_pyramid(premultiply_alpha(target, mask), levels).levels;
  weight_ = build_pyramid(weights.w, levels).levels;

  const Image* fw = nullptr;
  if (options.feature_weighting == FeatureWeighting::kFull) fw = &weights.w;
  if (options.feature_weighting == FeatureWeighting::kHoleOnly) fw = &weights.w_h;
  for (std::size_t i = 0; i < correspondences.size(); ++i) {
    if (!correspondences.inliers[i]) continue;
    const auto& c = correspondences.pairs[i];
    src_points_.emplace_back(c.xs, c.ys);
    dst_points_.emplace_back(c.xt, c.yt);
    src_raw_.push_back(raw_depth.sample_bilinear(c.xs, c.ys));
    feat_weight_.push_back(fw ? fw->sample_bilinear(c.xt, c.yt) : 1.0);
  }
}

std::optional<double> JointObjective::level_photometric(const ParamVector& params, int level,
                                                        ParamVector* grad) const {
  const CameraIntrinsics kl = k_.at_level(level);
  const Image& src = source_[level];
  const Image& tgt = target_[level];
  const Image& wgt = weight_[level];
  const ReprojectedCoords coords = reproject_coords(kl, params, raw_[level]);
  SplatBuffers acc;
  acc.reset(tgt.width(), tgt.height());
  splat(src, coords, acc);

  const int w = tgt.width(), h = tgt.height();
  const int n_blocks = block_count(h, kRowBlock);
  std::vector<double> block_sum(n_blocks, 0.0), block_norm(n_blocks, 0.0);
  parallel_blocks(n_blocks, [&](int b) {
    double s = 0.0, nrm = 0.0;
    const int y_end = std::min(h, (b + 1) * kRowBlock);
    for (int y = b * kRowBlock; y < y_end; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t j = static_cast<std::size_t>(y) * w + x;
        const double c = acc.weight[j];
        if (c <= kMinCoverage) continue;
        const float* t = tgt.pixel(x, y);
        const double a = t[3];
        double e = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
          const double d = a * acc.color[3 * j + ch] - t[ch] * c;
          e += d * d;
        }
        s += wgt.at(x, y) * e / c;
        nrm += a * c;
      }
    }
    block_sum[b] = s;
    block_norm[b] = nrm;
  });
  double sum = 0.0, norm = 0.0;
  for (int b = 0; b < n_blocks; ++b) {
    sum += block_sum[b];
    norm += block_norm[b];
  }
  if (norm < kMinNormalizer) return std::nullopt;
  const double loss = sum / norm;
  if (!grad) return loss;

  // Adjoints w.r.t. the splat accumulators A (color) and C (weight).
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> g_color(3 * n, 0.0), g_weight(n, 0.0);
  const double inv_n = 1.0 / norm;
  const double ratio = loss * inv_n;
  parallel_blocks(n_blocks, [&](int b) {
    const int y_end = std::min(h, (b + 1) * kRowBlock);
    for (int y = b * kRowBlock; y < y_end; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t j = static_cast<std::size_t>(y) * w + x;
        const double c = acc.weight[j];
        if (c <= kMinCoverage) continue;
        const float* t = tgt.pixel(x, y);
        const double a = t[3];
        const double wq = wgt.at(x, y);
        double e = 0.0, dt = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
          const double d = a * acc.color[3 * j + ch] - t[ch] * c;
          e += d * d;
          dt += d * t[ch];
          g_color[3 * j + ch] = wq * 2.0 * a * d / c * inv_n;
        }
        g_weight[j] = wq * (-2.0 * dt / c - e / (c * c)) * inv_n - ratio * a;
      }
    }
  });
  std::vector<double> gu, gv;
  splat_backward(src, coords, w, h, g_color, g_weight, gu, gv);
  *grad += coords_gradient(kl, params, raw_[level], coords, gu, gv);
  return loss;
}

double JointObjective::features(const ParamVector& params, ParamVector* grad, int* valid) const {
  const double alpha = options_.robust_alpha, c = options_.robust_scale;
  double sum = 0.0;
  ParamVector g = ParamVector::Zero();
  int count = 0;
  for (std::size_t i = 0; i < src_points_.size(); ++i) {
    const PointProjection p = project_point(k_, params, src_points_[i].x(), src_points_[i].y(),
                                            src_raw_[i], grad != nullptr);
    if (!p.valid) continue;
    ++count;
    const Vec2 r = p.uv - dst_points_[i];
    const double r2 = r.squaredNorm();
    sum += feat_weight_[i] * robust_fn(std::sqrt(r2), alpha, c);
    if (grad) {
      g += feat_weight_[i] * robust_fn_dsq(r2, alpha, c) * 2.0 * (p.jacobian.transpose() * r);
    }
  }
  *valid = count;
  if (count == 0) throw DegenerateError("feature loss: no feature has positive depth");
  if (grad) *grad += g / count;
  return sum / count;
}

double JointObjective::negative_depth(const ParamVector& params, ParamVector* grad) const {
  const double s = params[param::kScale], b = params[param::kOffset];
  double sum = 0.0, g_s = 0.0, g_b = 0.0;
  for (float r : raw_full_.data()) {
    const double d = s * r + b;
    if (d < 0.0) {
      sum -= d;
      g_s -= r;
      g_b -= 1.0;
    }
  }
  if (grad) {
    (*grad)[param::kScale] += g_s;
    (*grad)[param::kOffset] += g_b;
  }
  return sum;
}

LossBreakdown JointObjective::evaluate(const ParamVector& params, int level,
                                       ParamVector* grad) const {
  if (level < 0 || level >= levels()) {
    throw PreconditionError("objective: level " + std::to_string(level) + " out of range");
  }
  if (!params.allFinite()) throw DegenerateError("objective: non-finite parameters");
  ParamVector g_photo = ParamVector::Zero(), g_feat = ParamVector::Zero(),
              g_negd = ParamVector::Zero();
  double photo = 0.0;
  int skipped = 0;
  for (int l = level; l < levels(); ++l) {
    const auto v = level_photometric(params, l, grad ? &g_photo : nullptr);
    if (v) {
      photo += *v;
    } else {
      ++skipped;
    }
  }
  int valid = 0;
  const double feat = features(params, grad ? &g_feat : nullptr, &valid);
  const double negd = negative_depth(params, grad ? &g_negd : nullptr);
  LossBreakdown out = total_loss(photo, feat, negd, options_.lambda);
  out.skipped_levels = skipped;
  out.valid_features = valid;
  if (grad) {
    const auto& lam = options_.lambda;
    *grad = lam.photo * g_photo + lam.feat * g_feat + lam.negd * g_negd;
  }
  return out;
}

}  // namespace geofill
