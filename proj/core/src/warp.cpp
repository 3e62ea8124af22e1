#include "geofill/warp.hpp"

#include <algorithm>
#include <cmath>

#include "geofill/error.hpp"
#include "geofill/parallel.hpp"

namespace geofill {

namespace {

constexpr int kRowBlock = 16;
constexpr double kSnap = 1e-9;

double snap(double c) {
  const double r = std::nearbyint(c);
  return std::abs(c - r) < kSnap ? r : c;
}

struct Frame {
  Mat3 r;
  Vec3 t;
  double scale;
  double offset;
};

Frame make_frame(const ParamVector& p) {
  const RelativePose pose = unpack_pose(p);
  return {pose.rotation_matrix(), pose.translation, p[param::kScale], p[param::kOffset]};
}

}  // namespace

ReprojectedCoords reproject_coords(const CameraIntrinsics& k, const RelativePose& pose,
                                   const DepthState& depth) {
  return reproject_coords(k, pack_params(pose, depth.scale, depth.offset), depth.raw);
}

ReprojectedCoords reproject_coords(const CameraIntrinsics& k, const ParamVector& params,
                                   const Image& raw) {
  if (raw.channels() != 1) throw PreconditionError("reproject: depth must have 1 channel");
  const Frame f = make_frame(params);
  ReprojectedCoords out;
  out.width = raw.width();
  out.height = raw.height();
  const std::size_t n = raw.pixel_count();
  out.u.assign(n, 0.0);
  out.v.assign(n, 0.0);
  out.z.assign(n, 0.0);
  out.valid.assign(n, 0);
  const int h = raw.height();
  parallel_blocks(block_count(h, kRowBlock), [&](int block) {
    const int y_end = std::min(h, (block + 1) * kRowBlock);
    for (int y = block * kRowBlock; y < y_end; ++y) {
      for (int x = 0; x < raw.width(); ++x) {
        const double d = f.scale * raw.at(x, y) + f.offset;
        if (!(d > 0.0)) continue;
        const Vec3 p = f.r * (d * k.ray(x, y)) + f.t;
        if (!(p.z() > 0.0)) continue;
        const std::size_t i = out.index(x, y);
        out.u[i] = snap(k.fx * p.x() / p.z() + k.cx);
        out.v[i] = snap(k.fy * p.y() / p.z() + k.cy);
        out.z[i] = p.z();
        out.valid[i] = 1;
      }
    }
  });
  return out;
}

void SplatBuffers::reset(int w, int h) {
  width = w;
  height = h;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  color.assign(3 * n, 0.0);
  weight.assign(n, 0.0);
}

void splat(const Image& src, const ReprojectedCoords& coords, SplatBuffers& out) {
  if (src.channels() != 3) throw PreconditionError("splat: source must be RGB");
  if (src.width() != coords.width || src.height() != coords.height) {
    throw PreconditionError("splat: coordinates do not match the source raster");
  }
  const int w = out.width, h = out.height;
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const std::size_t i = coords.index(x, y);
      if (!coords.valid[i]) continue;
      const double u = coords.u[i], v = coords.v[i];
      const double fx0 = std::floor(u), fy0 = std::floor(v);
      if (fx0 < -1.0 || fy0 < -1.0 || fx0 >= w || fy0 >= h) continue;
      const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
      const double ax = u - fx0, ay = v - fy0;
      const float* c = src.pixel(x, y);
      const double wts[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      for (int k = 0; k < 4; ++k) {
        const int tx = x0 + (k & 1), ty = y0 + (k >> 1);
        if (tx < 0 || ty < 0 || tx >= w || ty >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ty) * w + tx;
        out.weight[j] += wts[k];
        out.color[3 * j] += wts[k] * c[0];
        out.color[3 * j + 1] += wts[k] * c[1];
        out.color[3 * j + 2] += wts[k] * c[2];
      }
    }
  }
}

WarpResult forward_warp(const Image& src, const ReprojectedCoords& coords, int out_width,
                        int out_height) {
  SplatBuffers acc;
  acc.reset(out_width, out_height);
  splat(src, coords, acc);
  WarpResult out{Image(out_width, out_height, 3), Image(out_width, out_height, 1)};
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const std::size_t j = static_cast<std::size_t>(y) * out_width + x;
      const double c = acc.weight[j];
      out.coverage.at(x, y) = static_cast<float>(c);
      if (c <= kMinCoverage) continue;
      for (int ch = 0; ch < 3; ++ch) {
        out.image.at(x, y, ch) = static_cast<float>(acc.color[3 * j + ch] / c);
      }
    }
  }
  return out;
}

void splat_backward(const Image& src, const ReprojectedCoords& coords, int out_width,
                    int out_height, const std::vector<double>& grad_color,
                    const std::vector<double>& grad_weight, std::vector<double>& grad_u,
                    std::vector<double>& grad_v) {
  const std::size_t n = src.pixel_count();
  grad_u.assign(n, 0.0);
  grad_v.assign(n, 0.0);
  const int w = out_width, h = out_height;
  parallel_blocks(block_count(src.height(), kRowBlock), [&](int block) {
    const int y_end = std::min(src.height(), (block + 1) * kRowBlock);
    for (int y = block * kRowBlock; y < y_end; ++y) {
      for (int x = 0; x < src.width(); ++x) {
        const std::size_t i = coords.index(x, y);
        if (!coords.valid[i]) continue;
        const double u = coords.u[i], v = coords.v[i];
        const double fx0 = std::floor(u), fy0 = std::floor(v);
        if (fx0 < -1.0 || fy0 < -1.0 || fx0 >= w || fy0 >= h) continue;
        const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
        const double ax = u - fx0, ay = v - fy0;
        const float* c = src.pixel(x, y);
        double hq[4] = {0, 0, 0, 0};
        for (int k = 0; k < 4; ++k) {
          const int tx = x0 + (k & 1), ty = y0 + (k >> 1);
          if (tx < 0 || ty < 0 || tx >= w || ty >= h) continue;
          const std::size_t j = static_cast<std::size_t>(ty) * w + tx;
          hq[k] = grad_color[3 * j] * c[0] + grad_color[3 * j + 1] * c[1] +
                  grad_color[3 * j + 2] * c[2] + grad_weight[j];
        }
        grad_u[i] = (1 - ay) * (hq[1] - hq[0]) + ay * (hq[3] - hq[2]);
        grad_v[i] = (1 - ax) * (hq[2] - hq[0]) + ax * (hq[3] - hq[1]);
      }
    }
  });
}

PointProjection project_point(const CameraIntrinsics& k, const ParamVector& params, double x,
                              double y, double raw, bool with_jacobian) {
  const Frame f = make_frame(params);
  PointProjection out;
  out.depth = f.scale * raw + f.offset;
  if (!(out.depth > 0.0)) return out;
  const Vec3 ray = k.ray(x, y);
  const Vec3 xs = out.depth * ray;
  const Vec3 p = f.r * xs + f.t;
  if (!(p.z() > 0.0)) return out;
  out.valid = true;
  out.z = p.z();
  out.uv = {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
  if (!with_jacobian) return out;

  Eigen::Matrix<double, 2, 3> jp;
  jp << k.fx / p.z(), 0.0, -k.fx * p.x() / (p.z() * p.z()), 0.0, k.fy / p.z(),
      -k.fy * p.y() / (p.z() * p.z());
  const Vec4 q = params.segment<4>(param::kQuat);
  const auto dr = rotation_derivatives(q.normalized());
  Eigen::Matrix<double, 2, 4> jq;
  for (int c = 0; c < 4; ++c) jq.col(c) = jp * (dr[c] * xs);
  for (int row = 0; row < 2; ++row) {
    out.jacobian.block<1, 4>(row, param::kQuat) =
        quaternion_chain(q, jq.row(row).transpose()).transpose();
  }
  out.jacobian.block<2, 3>(0, param::kTrans) = jp;
  const Vec3 rr = f.r * ray;
  out.jacobian.col(param::kScale) = jp * (raw * rr);
  out.jacobian.col(param::kOffset) = jp * rr;
  return out;
}

std::vector<PointProjection> warp_points(const std::vector<Vec2>& points,
                                         const CameraIntrinsics& k, const ParamVector& params,
                                         const Image& raw, bool with_jacobian) {
  std::vector<PointProjection> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    out.push_back(project_point(k, params, p.x(), p.y(), raw.sample_bilinear(p.x(), p.y()),
                                with_jacobian));
  }
  return out;
}

ParamVector coords_gradient(const CameraIntrinsics& k, const ParamVector& params,
                            const Image& raw, const ReprojectedCoords& coords,
                            const std::vector<double>& grad_u, const std::vector<double>& grad_v) {
  struct Partial {
    Vec3 gt = Vec3::Zero();
    Mat3 ms = Mat3::Zero();  // sum raw * G_Y ray^T
    Mat3 mb = Mat3::Zero();  // sum G_Y ray^T
  };
  const int h = coords.height;
  const int n_blocks = block_count(h, kRowBlock);
  std::vector<Partial> partial(static_cast<std::size_t>(n_blocks));
  parallel_blocks(n_blocks, [&](int block) {
    Partial acc;
    const int y_end = std::min(h, (block + 1) * kRowBlock);
    for (int y = block * kRowBlock; y < y_end; ++y) {
      for (int x = 0; x < coords.width; ++x) {
        const std::size_t i = coords.index(x, y);
        if (!coords.valid[i]) continue;
        const double gu = grad_u[i], gv = grad_v[i];
        if (gu == 0.0 && gv == 0.0) continue;
        const double iz = 1.0 / coords.z[i];
        const Vec3 gy(gu * k.fx * iz, gv * k.fy * iz,
                      -(gu * (coords.u[i] - k.cx) + gv * (coords.v[i] - k.cy)) * iz);
        const Vec3 ray = k.ray(x, y);
        const Mat3 outer = gy * ray.transpose();
        acc.gt += gy;
        acc.mb += outer;
        acc.ms += raw.at(x, y) * outer;
      }
    }
    partial[static_cast<std::size_t>(block)] = acc;
  });
  Partial total;
  for (const auto& p : partial) {
    total.gt += p.gt;
    total.ms += p.ms;
    total.mb += p.mb;
  }
  const Frame f = make_frame(params);
  const Vec4 q = params.segment<4>(param::kQuat);
  const auto dr = rotation_derivatives(q.normalized());
  // sum G_Y X^T with X = (s raw + b) ray.
  const Mat3 mx = f.scale * total.ms + f.offset * total.mb;
  Vec4 gq_unit;
  for (int c = 0; c < 4; ++c) gq_unit[c] = (dr[c].array() * mx.array()).sum();
  ParamVector g;
  g.segment<4>(param::kQuat) = quaternion_chain(q, gq_unit);
  g.segment<3>(param::kTrans) = total.gt;
  g[param::kScale] = (f.r.array() * total.ms.array()).sum();
  g[param::kOffset] = (f.r.array() * total.mb.array()).sum();
  return g;
}

}  // namespace geofill
