#include "cotplan/camera.h"

#include <cmath>

namespace cotplan {

bool CameraIntrinsics::Valid() const {
  return std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) &&
         std::isfinite(cy) && fx > 0.0 && fy > 0.0;
}

double RigidTransform::QuaternionNorm() const {
  const auto& q = q_wxyz;
  return std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
}

namespace {

// Rotation matrix of a unit quaternion, row major.
std::array<double, 9> RotationMatrix(const std::array<double, 4>& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
          2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
          2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
}

}  // namespace

Vec3 RigidTransform::Apply(const Vec3& p) const {
  const auto r = RotationMatrix(q_wxyz);
  return {r[0] * p[0] + r[1] * p[1] + r[2] * p[2] + t[0],
          r[3] * p[0] + r[4] * p[1] + r[5] * p[2] + t[1],
          r[6] * p[0] + r[7] * p[1] + r[8] * p[2] + t[2]};
}

Vec3 RigidTransform::ApplyInverse(const Vec3& p) const {
  const auto r = RotationMatrix(q_wxyz);
  const Vec3 d{p[0] - t[0], p[1] - t[1], p[2] - t[2]};
  return {r[0] * d[0] + r[3] * d[1] + r[6] * d[2],
          r[1] * d[0] + r[4] * d[1] + r[7] * d[2],
          r[2] * d[0] + r[5] * d[1] + r[8] * d[2]};
}

}  // namespace cotplan
