#pragma once

#include <Eigen/Core>

#include "geofill/camera.hpp"

namespace geofill {

/// Joint optimization variables: q (w, x, y, z) at 0..3, t at 4..6,
/// depth scale at 7, depth offset at 8.
using ParamVector = Eigen::Matrix<double, 9, 1>;

namespace param {
inline constexpr int kQuat = 0;
inline constexpr int kTrans = 4;
inline constexpr int kScale = 7;
inline constexpr int kOffset = 8;
}  // namespace param

inline ParamVector pack_params(const RelativePose& pose, double scale, double offset) {
  ParamVector p;
  p.segment<4>(param::kQuat) = pose.rotation;
  p.segment<3>(param::kTrans) = pose.translation;
  p[param::kScale] = scale;
  p[param::kOffset] = offset;
  return p;
}

/// Pose with the quaternion normalized (sign untouched).
inline RelativePose unpack_pose(const ParamVector& p) {
  RelativePose pose;
  pose.rotation = p.segment<4>(param::kQuat).normalized();
  pose.translation = p.segment<3>(param::kTrans);
  return pose;
}

/// Partial derivatives of R(q) for a unit quaternion q, one per component.
inline std::array<Mat3, 4> rotation_derivatives(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Mat3, 4> d;
  d[0] << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
  d[1] << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
  d[2] << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
  d[3] << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
  return d;
}

/// Maps a gradient taken w.r.t. the normalized quaternion q/|q| to the raw
/// components, which is the tangent projection scaled by 1/|q|.
inline Vec4 quaternion_chain(const Vec4& q_raw, const Vec4& grad_unit) {
  const double n = q_raw.norm();
  const Vec4 qh = q_raw / n;
  return (grad_unit - qh * qh.dot(grad_unit)) / n;
}

}  // namespace geofill
