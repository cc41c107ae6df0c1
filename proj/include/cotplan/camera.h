#pragma once

#include <array>

namespace cotplan {

/// Pinhole intrinsics in pixels.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  bool Valid() const;
};

using Vec3 = std::array<double, 3>;

/// Rigid transform p_cam = R(q) * p_ego + t with a unit quaternion (w, x, y, z).
struct RigidTransform {
  Vec3 t{0.0, 0.0, 0.0};
  std::array<double, 4> q_wxyz{1.0, 0.0, 0.0, 0.0};

  Vec3 Apply(const Vec3& p) const;
  /// p_ego = R(q)^T * (p_cam - t).
  Vec3 ApplyInverse(const Vec3& p) const;
  double QuaternionNorm() const;
};

/// Front camera calibration. Camera axes: x right, y down, z forward.
struct CameraCalibration {
  CameraIntrinsics intrinsics;
  RigidTransform cam_from_ego;
};

inline constexpr double kQuaternionNormTolerance = 1e-6;

}  // namespace cotplan
