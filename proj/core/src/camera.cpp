#include "geofill/camera.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "geofill/error.hpp"

namespace geofill {

CameraIntrinsics CameraIntrinsics::centered(int width, int height, double focal) {
  return {focal, focal, 0.5 * (width - 1), 0.5 * (height - 1)};
}

CameraIntrinsics CameraIntrinsics::at_level(int level) const {
  const double f = std::ldexp(1.0, -level);
  return {fx * f, fy * f, cx * f, cy * f};
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 CameraIntrinsics::inverse() const {
  Mat3 k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate(int width, int height) const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw PreconditionError("intrinsics: focal lengths must be positive");
  }
  if (!(cx >= 0.0 && cx <= width - 1) || !(cy >= 0.0 && cy <= height - 1)) {
    throw PreconditionError("intrinsics: principal point outside the " + std::to_string(width) +
                            "x" + std::to_string(height) + " image");
  }
}

Mat3 quaternion_to_matrix(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Vec4 matrix_to_quaternion(const Mat3& r) {
  // Shepperd's method: branch on the largest diagonal term.
  Vec4 q;
  const double trace = r.trace();
  if (trace > r(0, 0) && trace > r(1, 1) && trace > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + trace);
    q << 0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2));
    q << (r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2));
    q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1));
    q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s;
  }
  q.normalize();
  if (q[0] < 0.0) q = -q;
  return q;
}

Vec4 quaternion_multiply(const Vec4& a, const Vec4& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
          a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

Vec4 axis_angle_quaternion(const Vec3& axis, double angle_rad) {
  const Vec3 n = axis.normalized();
  const double s = std::sin(0.5 * angle_rad);
  return {std::cos(0.5 * angle_rad), s * n.x(), s * n.y(), s * n.z()};
}

RelativePose RelativePose::from_rt(const Mat3& r, const Vec3& t) {
  RelativePose pose;
  pose.rotation = matrix_to_quaternion(r);
  pose.translation = t;
  return pose;
}

void RelativePose::canonicalize() {
  rotation.normalize();
  if (rotation[0] < 0.0) rotation = -rotation;
}

Image DepthState::effective_map() const {
  Image out(raw.width(), raw.height(), 1);
  auto src = raw.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(scale * src[i] + offset);
  }
  return out;
}

std::size_t CorrespondenceSet::inlier_count() const {
  return static_cast<std::size_t>(std::count(inliers.begin(), inliers.end(), true));
}

CorrespondenceSet CorrespondenceSet::inlier_subset() const {
  CorrespondenceSet out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (inliers[i]) out.push_back(pairs[i]);
  }
  return out;
}

}  // namespace geofill
