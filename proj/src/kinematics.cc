#include "cotplan/kinematics.h"

#include <cmath>
#include <numbers>

namespace cotplan {

namespace {

void RequireFinite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw KinematicsError(KinematicsError::Kind::kNonFiniteInput,
                          std::string("non-finite ") + what);
  }
}

void RequireFinite(std::span<const Point2> points) {
  for (const auto& p : points) {
    RequireFinite(p.x, "point coordinate");
    RequireFinite(p.y, "point coordinate");
  }
}

// Derivative of a sampled signal at index i. Central differences inside,
// three-point one-sided stencils at both ends; all O(dt^2).
template <typename Get>
auto FiniteDifference(Get get, std::size_t i, std::size_t n, double dt) {
  if (i == 0) return (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * dt);
  if (i == n - 1) {
    return (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * dt);
  }
  return (get(i + 1) - get(i - 1)) / (2.0 * dt);
}

// Second derivative at index i, O(dt^2) with four points at the ends. With
// only three samples the ends fall back to the plain second difference.
template <typename Get>
auto SecondDifference(Get get, std::size_t i, std::size_t n, double dt) {
  const double dt2 = dt * dt;
  if (n == 3) return (get(0) - 2.0 * get(1) + get(2)) / dt2;
  if (i == 0) {
    return (2.0 * get(0) - 5.0 * get(1) + 4.0 * get(2) - get(3)) / dt2;
  }
  if (i == n - 1) {
    return (2.0 * get(n - 1) - 5.0 * get(n - 2) + 4.0 * get(n - 3) -
            get(n - 4)) / dt2;
  }
  return (get(i + 1) - 2.0 * get(i) + get(i - 1)) / dt2;
}

}  // namespace

double NormalizeAngle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

void ControlProfile::Validate() const {
  RequireFinite(dt, "dt");
  if (!(dt > 0.0)) {
    throw KinematicsError(KinematicsError::Kind::kInvalidProfile,
                          "dt must be positive");
  }
  if (speed.size() != curvature.size()) {
    throw KinematicsError(KinematicsError::Kind::kInvalidProfile,
                          "speed and curvature lengths differ");
  }
  if (speed.size() < 2) {
    throw KinematicsError(KinematicsError::Kind::kInvalidProfile,
                          "profile needs at least 2 samples");
  }
  for (std::size_t i = 0; i < speed.size(); ++i) {
    RequireFinite(speed[i], "speed sample");
    RequireFinite(curvature[i], "curvature sample");
    if (speed[i] < 0.0) {
      throw KinematicsError(KinematicsError::Kind::kInvalidProfile,
                            "negative speed at sample " + std::to_string(i));
    }
  }
}

Trajectory IntegrateTrajectory(const ControlProfile& profile, double theta0,
                               Point2 origin) {
  profile.Validate();
  RequireFinite(theta0, "theta0");
  RequireFinite(origin.x, "origin");
  RequireFinite(origin.y, "origin");

  const std::size_t n = profile.size();
  const double half_dt = 0.5 * profile.dt;

  Trajectory out;
  out.dt = profile.dt;
  out.points.reserve(n);
  out.points.push_back(origin);

  double heading = theta0;
  double prev_rate = profile.curvature[0] * profile.speed[0];
  double prev_vx = profile.speed[0] * std::cos(heading);
  double prev_vy = profile.speed[0] * std::sin(heading);
  Point2 pos = origin;

  for (std::size_t i = 1; i < n; ++i) {
    const double rate = profile.curvature[i] * profile.speed[i];
    heading += half_dt * (prev_rate + rate);
    const double vx = profile.speed[i] * std::cos(heading);
    const double vy = profile.speed[i] * std::sin(heading);
    pos.x += half_dt * (prev_vx + vx);
    pos.y += half_dt * (prev_vy + vy);
    out.points.push_back(pos);
    prev_rate = rate;
    prev_vx = vx;
    prev_vy = vy;
  }
  return out;
}

DifferentiatedPath DifferentiateTrajectory(std::span<const Point2> points,
                                           double dt) {
  if (points.size() < 3) {
    throw KinematicsError(KinematicsError::Kind::kTooFewPoints,
                          "differentiation needs at least 3 points, got " +
                              std::to_string(points.size()));
  }
  RequireFinite(dt, "dt");
  if (!(dt > 0.0)) {
    throw KinematicsError(KinematicsError::Kind::kInvalidProfile,
                          "dt must be positive");
  }
  RequireFinite(points);

  const std::size_t n = points.size();
  DifferentiatedPath out;
  out.profile.dt = dt;
  out.profile.speed.resize(n);
  out.profile.curvature.resize(n);
  out.headings.resize(n);

  auto px = [&](std::size_t j) { return points[j].x; };
  auto py = [&](std::size_t j) { return points[j].y; };
  for (std::size_t i = 0; i < n; ++i) {
    const double vx = FiniteDifference(px, i, n, dt);
    const double vy = FiniteDifference(py, i, n, dt);
    const double speed = std::hypot(vx, vy);
    out.profile.speed[i] = speed;
    out.headings[i] = std::atan2(vy, vx);
    // Signed curvature straight from velocity and acceleration; taking the
    // difference of headings would lose an order next to the ends.
    if (speed < kStandstillSpeed) {
      out.profile.curvature[i] = 0.0;
      continue;
    }
    const double ax = SecondDifference(px, i, n, dt);
    const double ay = SecondDifference(py, i, n, dt);
    out.profile.curvature[i] = (vx * ay - vy * ax) / (speed * speed * speed);
  }

  // Unwrap so consecutive headings never jump by more than pi. A stationary
  // sample has atan2(0, 0) == 0; carry the previous heading through it.
  for (std::size_t i = 1; i < n; ++i) {
    if (out.profile.speed[i] < kStandstillSpeed) {
      out.headings[i] = out.headings[i - 1];
      continue;
    }
    out.headings[i] = out.headings[i - 1] +
                      NormalizeAngle(out.headings[i] - out.headings[i - 1]);
  }
  return out;
}

std::vector<Point2> ToEgoFrame(std::span<const Point2> global_points,
                               const Pose2D& anchor) {
  RequireFinite(anchor.x, "anchor");
  RequireFinite(anchor.y, "anchor");
  RequireFinite(anchor.yaw, "anchor yaw");
  RequireFinite(global_points);
  const double c = std::cos(anchor.yaw);
  const double s = std::sin(anchor.yaw);
  std::vector<Point2> out;
  out.reserve(global_points.size());
  for (const auto& p : global_points) {
    const double dx = p.x - anchor.x;
    const double dy = p.y - anchor.y;
    out.push_back({c * dx + s * dy, -s * dx + c * dy});
  }
  return out;
}

std::vector<Point2> FromEgoFrame(std::span<const Point2> ego_points,
                                 const Pose2D& anchor) {
  RequireFinite(anchor.x, "anchor");
  RequireFinite(anchor.y, "anchor");
  RequireFinite(anchor.yaw, "anchor yaw");
  RequireFinite(ego_points);
  const double c = std::cos(anchor.yaw);
  const double s = std::sin(anchor.yaw);
  std::vector<Point2> out;
  out.reserve(ego_points.size());
  for (const auto& p : ego_points) {
    out.push_back({anchor.x + c * p.x - s * p.y, anchor.y + s * p.x + c * p.y});
  }
  return out;
}

}  // namespace cotplan
