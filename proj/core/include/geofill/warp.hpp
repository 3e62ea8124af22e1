#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "geofill/camera.hpp"
#include "geofill/image.hpp"
#include "geofill/params.hpp"

namespace geofill {

/// Coverage below this marks a target pixel as empty.
inline constexpr double kMinCoverage = 1e-6;

/// Per-source-pixel target coordinates, row-major over the source raster.
/// Invalid entries (non-positive effective depth, or behind the target
/// camera) hold zeros and are never splatted.
struct ReprojectedCoords {
  int width = 0;
  int height = 0;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> z;
  std::vector<std::uint8_t> valid;

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
};

ReprojectedCoords reproject_coords(const CameraIntrinsics& k, const RelativePose& pose,
                                   const DepthState& depth);
ReprojectedCoords reproject_coords(const CameraIntrinsics& k, const ParamVector& params,
                                   const Image& raw);

struct WarpResult {
  Image image;     // RGB; zero where coverage <= kMinCoverage
  Image coverage;  // accumulated bilinear splat weight
  bool valid(int x, int y) const noexcept { return coverage.at(x, y) > kMinCoverage; }
};

/// Raw splat accumulators in double precision: color sums A (3 per pixel)
/// and weight sums C.
struct SplatBuffers {
  int width = 0;
  int height = 0;
  std::vector<double> color;
  std::vector<double> weight;

  void reset(int w, int h);
};

/// Bilinear forward splat of every valid source pixel. Accumulation runs in
/// source raster order, so sums are reproducible bit for bit.
void splat(const Image& src, const ReprojectedCoords& coords, SplatBuffers& out);

WarpResult forward_warp(const Image& src, const ReprojectedCoords& coords, int out_width,
                        int out_height);

/// Adjoint of splat(): given dL/dA (3 per target pixel) and dL/dC, returns
/// dL/du and dL/dv for every source pixel (zero for invalid ones).
void splat_backward(const Image& src, const ReprojectedCoords& coords, int out_width,
                    int out_height, const std::vector<double>& grad_color,
                    const std::vector<double>& grad_weight, std::vector<double>& grad_u,
                    std::vector<double>& grad_v);

/// Projection of one source pixel with its 2x9 Jacobian w.r.t. the raw
/// parameter vector. Quaternion columns already include normalization.
struct PointProjection {
  Vec2 uv = Vec2::Zero();
  double z = 0.0;
  double depth = 0.0;
  bool valid = false;
  Eigen::Matrix<double, 2, 9> jacobian = Eigen::Matrix<double, 2, 9>::Zero();
};

PointProjection project_point(const CameraIntrinsics& k, const ParamVector& params, double x,
                              double y, double raw, bool with_jacobian = true);

/// Projects source feature points, reading raw depth by bilinear lookup.
std::vector<PointProjection> warp_points(const std::vector<Vec2>& points,
                                         const CameraIntrinsics& k, const ParamVector& params,
                                         const Image& raw, bool with_jacobian = true);

/// Accumulated form of the chain rule from per-pixel (dL/du, dL/dv) to the
/// 9 parameters. Sums run over fixed row blocks reduced in block order.
ParamVector coords_gradient(const CameraIntrinsics& k, const ParamVector& params,
                            const Image& raw, const ReprojectedCoords& coords,
                            const std::vector<double>& grad_u, const std::vector<double>& grad_v);

}  // namespace geofill
