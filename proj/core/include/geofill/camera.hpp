#pragma once

#include <Eigen/Core>
#include <array>

#include "geofill/image.hpp"

namespace geofill {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics in pixels. Pixel centers sit on integer coordinates.
struct CameraIntrinsics {
  double fx = 750.0;
  double fy = 750.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Principal point at the geometric image center, (w-1)/2 and (h-1)/2.
  static CameraIntrinsics centered(int width, int height, double focal);

  /// Intrinsics of pyramid level `level` (every level halves resolution and
  /// keeps the even-indexed pixels of the level below).
  CameraIntrinsics at_level(int level) const;

  Mat3 matrix() const;
  Mat3 inverse() const;
  Vec3 ray(double x, double y) const { return {(x - cx) / fx, (y - cy) / fy, 1.0}; }
  Vec2 project(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }

  /// Throws unless focal lengths are positive and the principal point lies
  /// inside a width x height image.
  void validate(int width, int height) const;
};

/// Rotation matrix of a unit quaternion (w, x, y, z).
Mat3 quaternion_to_matrix(const Vec4& q);
/// Unit quaternion with w >= 0.
Vec4 matrix_to_quaternion(const Mat3& r);
Vec4 quaternion_multiply(const Vec4& a, const Vec4& b);
Vec4 axis_angle_quaternion(const Vec3& axis, double angle_rad);

/// Maps source-camera coordinates to target-camera coordinates:
/// X_t = R(q) X_s + t.
struct RelativePose {
  Vec4 rotation{1.0, 0.0, 0.0, 0.0};
  Vec3 translation{0.0, 0.0, 0.0};

  static RelativePose identity() { return {}; }
  static RelativePose from_rt(const Mat3& r, const Vec3& t);

  Mat3 rotation_matrix() const { return quaternion_to_matrix(rotation); }
  Vec3 transform(const Vec3& p) const { return rotation_matrix() * p + translation; }
  /// Renormalizes the quaternion and flips it to w >= 0.
  void canonicalize();
};

/// Dense source depth with its affine correction: effective = scale*raw + offset.
struct DepthState {
  Image raw;
  double scale = 1.0;
  double offset = 0.0;

  double effective(int x, int y) const { return scale * raw.at(x, y) + offset; }
  Image effective_map() const;
};

struct Correspondence {
  double xs = 0.0;
  double ys = 0.0;
  double xt = 0.0;
  double yt = 0.0;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  std::vector<bool> inliers;

  std::size_t size() const noexcept { return pairs.size(); }
  void push_back(const Correspondence& c) {
    pairs.push_back(c);
    inliers.push_back(true);
  }
  std::size_t inlier_count() const;
  CorrespondenceSet inlier_subset() const;
};

}  // namespace geofill
