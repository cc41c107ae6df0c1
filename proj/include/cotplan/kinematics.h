#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cotplan {

/// Planar point in metres. In the ego frame x points forward and y to the left.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Wraps an angle to (-pi, pi].
double NormalizeAngle(double radians);

/// Global planar pose; yaw is counter-clockwise from the global +x axis.
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

/// Paired speed (m/s) and curvature (1/m) samples at a fixed time step.
/// Sample i is taken at time i * dt.
struct ControlProfile {
  double dt = 0.5;
  std::vector<double> speed;
  std::vector<double> curvature;

  std::size_t size() const { return speed.size(); }

  /// Throws KinematicsError when the length, sign or finiteness invariants
  /// do not hold.
  void Validate() const;
};

/// Timestamped ego-frame waypoints; points[0] is the anchor.
struct Trajectory {
  double dt = 0.5;
  std::vector<Point2> points;
};

/// Output of DifferentiateTrajectory: the recovered profile plus the
/// per-sample heading (unwrapped, radians).
struct DifferentiatedPath {
  ControlProfile profile;
  std::vector<double> headings;
};

class KinematicsError : public std::runtime_error {
 public:
  enum class Kind { kNonFiniteInput, kTooFewPoints, kInvalidProfile };

  KinematicsError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Integrates a control profile into a trajectory with the cumulative
/// trapezoidal rule, applied both to the heading rate k*s and to the
/// velocity components. The result has one point per profile sample and
/// points[0] == origin.
Trajectory IntegrateTrajectory(const ControlProfile& profile, double theta0,
                               Point2 origin);

/// Inverse of IntegrateTrajectory. Velocity and acceleration are estimated
/// with second-order finite differences (central in the interior,
/// one-sided stencils at the two ends) and curvature is their cross product
/// over speed cubed. Curvature is zero where the estimated speed is below
/// kStandstillSpeed.
DifferentiatedPath DifferentiateTrajectory(std::span<const Point2> points,
                                           double dt);

inline constexpr double kStandstillSpeed = 0.05;

/// Expresses global points relative to the anchor pose: x forward, y left.
std::vector<Point2> ToEgoFrame(std::span<const Point2> global_points,
                               const Pose2D& anchor);

/// Inverse of ToEgoFrame.
std::vector<Point2> FromEgoFrame(std::span<const Point2> ego_points,
                                 const Pose2D& anchor);

}  // namespace cotplan
