#include "geofill/metrics.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <array>
#include <cmath>
#include <numbers>

#include "geofill/error.hpp"

namespace geofill {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr int kSsimRadius = 5;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels()) {
    throw PreconditionError(std::string(what) + ": image shapes differ");
  }
}

void require_region_shape(const BinaryMap* region, const Image& a, const char* what) {
  if (region && (region->width != a.width() || region->height != a.height())) {
    throw PreconditionError(std::string(what) + ": region size differs from image");
  }
}

bool in_region(const BinaryMap* region, int x, int y) { return !region || region->at(x, y); }

Mat3 normalizing_transform(const std::vector<Vec2>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double spread = 0.0;
  for (const auto& p : pts) spread += (p - mean).norm();
  spread /= static_cast<double>(pts.size());
  const double s = spread > 0.0 ? std::sqrt(2.0) / spread : 1.0;
  Mat3 t;
  t << s, 0.0, -s * mean.x(), 0.0, s, -s * mean.y(), 0.0, 0.0, 1.0;
  return t;
}

}  // namespace

PoseError pose_error(const RelativePose& est, const RelativePose& gt) {
  if (!(gt.translation.norm() > 0.0)) throw PreconditionError("pose_error: zero ground-truth translation");
  if (!(est.translation.norm() > 0.0)) throw DegenerateError("pose_error: zero-length estimated translation");
  const Vec4 a = est.rotation.normalized(), b = gt.rotation.normalized();
  // |<a, b>| = cos(theta / 2); atan2 keeps precision near 0 and 180 degrees.
  const double c = std::abs(a.dot(b));
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  PoseError e;
  e.rotation_deg = 2.0 * std::atan2(s, c) * kRadToDeg;
  const Vec3& ta = est.translation;
  const Vec3& tb = gt.translation;
  e.translation_deg = std::atan2(ta.cross(tb).norm(), ta.dot(tb)) * kRadToDeg;
  return e;
}

DepthMetrics depth_metrics(const Image& est, const Image& gt, const BinaryMap* valid) {
  require_same_shape(est, gt, "depth_metrics");
  require_region_shape(valid, gt, "depth_metrics");
  if (gt.channels() != 1) throw PreconditionError("depth_metrics: expects single-channel depth");
  DepthMetrics m;
  double abs_rel = 0.0, sq_rel = 0.0, log2 = 0.0;
  std::size_t d1 = 0, d2 = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!in_region(valid, x, y)) continue;
      const double e = est.at(x, y), g = gt.at(x, y);
      if (!(e > 0.0) || !(g > 0.0)) {
        ++m.excluded;
        continue;
      }
      ++m.evaluated;
      abs_rel += std::abs(e - g) / g;
      sq_rel += (e - g) * (e - g) / g;
      const double l = std::log(e) - std::log(g);
      log2 += l * l;
      const double ratio = std::max(e / g, g / e);
      if (ratio < 1.25) ++d1;
      if (ratio < 1.25 * 1.25) ++d2;
    }
  }
  if (m.evaluated == 0) throw DegenerateError("depth_metrics: empty valid region");
  const double n = static_cast<double>(m.evaluated);
  m.abs_rel = abs_rel / n;
  m.sq_rel = sq_rel / n;
  m.rms_log = std::sqrt(log2 / n);
  m.delta1 = static_cast<double>(d1) / n;
  m.delta2 = static_cast<double>(d2) / n;
  return m;
}

double psnr(const Image& a, const Image& b, const BinaryMap* region) {
  require_same_shape(a, b, "psnr");
  require_region_shape(region, a, "psnr");
  double sse = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!in_region(region, x, y)) continue;
      for (int c = 0; c < a.channels(); ++c) {
        const double d = static_cast<double>(a.at(x, y, c)) - b.at(x, y, c);
        sse += d * d;
      }
      n += static_cast<std::size_t>(a.channels());
    }
  }
  if (n == 0) throw PreconditionError("psnr: empty region");
  const double mse = sse / static_cast<double>(n);
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b, const BinaryMap* region) {
  require_same_shape(a, b, "ssim");
  require_region_shape(region, a, "ssim");
  constexpr int r = kSsimRadius, n = 2 * kSsimRadius + 1;
  std::array<double, n * n> win{};
  double total = 0.0;
  for (int j = -r; j <= r; ++j) {
    for (int i = -r; i <= r; ++i) {
      const double g = std::exp(-(i * i + j * j) / (2.0 * kSsimSigma * kSsimSigma));
      win[static_cast<std::size_t>((j + r) * n + i + r)] = g;
      total += g;
    }
  }
  for (auto& g : win) g /= total;

  double sum = 0.0;
  std::size_t windows = 0;
  for (int y = r; y < a.height() - r; ++y) {
    for (int x = r; x < a.width() - r; ++x) {
      if (!in_region(region, x, y)) continue;
      for (int c = 0; c < a.channels(); ++c) {
        double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
        for (int j = -r; j <= r; ++j) {
          for (int i = -r; i <= r; ++i) {
            const double g = win[static_cast<std::size_t>((j + r) * n + i + r)];
            const double va = a.at(x + i, y + j, c), vb = b.at(x + i, y + j, c);
            ma += g * va;
            mb += g * vb;
            saa += g * va * va;
            sbb += g * vb * vb;
            sab += g * va * vb;
          }
        }
        const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
        sum += ((2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2)) /
               ((ma * ma + mb * mb + kSsimC1) * (var_a + var_b + kSsimC2));
      }
      ++windows;
    }
  }
  if (windows == 0) throw PreconditionError("ssim: no valid 11x11 window");
  return sum / static_cast<double>(windows * static_cast<std::size_t>(a.channels()));
}

Mat3 fit_homography(const CorrespondenceSet& pairs) {
  const std::size_t n = pairs.size();
  if (n < 4) throw PreconditionError("homography: need at least 4 correspondences");
  std::vector<Vec2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = {pairs.pairs[i].xs, pairs.pairs[i].ys};
    dst[i] = {pairs.pairs[i].xt, pairs.pairs[i].yt};
  }
  const Mat3 ts = normalizing_transform(src), tt = normalizing_transform(dst);
  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = ts * src[i].homogeneous(), q = tt * dst[i].homogeneous();
    const double u = q.x() / q.z(), v = q.y() / q.z();
    a.row(2 * i) << -p.x(), -p.y(), -1.0, 0.0, 0.0, 0.0, u * p.x(), u * p.y(), u;
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -p.x(), -p.y(), -1.0, v * p.x(), v * p.y(), v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd hv = svd.matrixV().col(8);
  Mat3 hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
  Mat3 h = tt.inverse() * hn * ts;
  if (!h.allFinite()) throw DegenerateError("homography: non-finite fit");
  const double s = std::abs(h(2, 2)) > 1e-12 ? h(2, 2) : h.norm();
  if (s == 0.0) throw DegenerateError("homography: degenerate configuration");
  return h / s;
}

Image warp_homography(const Image& source_rgb, const Mat3& h, int width, int height) {
  if (source_rgb.channels() < 3) throw PreconditionError("warp_homography: expects RGB source");
  const Mat3 inv = h.inverse();
  if (!inv.allFinite()) throw DegenerateError("warp_homography: singular homography");
  Image out(width, height, 4);
  const double xmax = source_rgb.width() - 1.0, ymax = source_rgb.height() - 1.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec3 s = inv * Vec3(x, y, 1.0);
      if (!(s.z() > 0.0)) continue;
      const double u = s.x() / s.z(), v = s.y() / s.z();
      if (!(u >= 0.0 && v >= 0.0 && u <= xmax && v <= ymax)) continue;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(source_rgb.sample_bilinear(u, v, c));
      out.at(x, y, 3) = 1.0f;
    }
  }
  return out;
}

}  // namespace geofill
