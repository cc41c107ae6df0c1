#include "cotplan/kinematics.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "test_util.h"

namespace cotplan {
namespace {

constexpr double kPi = std::numbers::pi;

ControlProfile Constant(double speed, double curvature, double dt, int n) {
  ControlProfile p;
  p.dt = dt;
  p.speed.assign(n, speed);
  p.curvature.assign(n, curvature);
  return p;
}

double MaxAbsDiff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(NormalizeAngle, WrapsIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(NormalizeAngle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(NormalizeAngle(kPi), kPi);
  EXPECT_DOUBLE_EQ(NormalizeAngle(-kPi), kPi);
  EXPECT_NEAR(NormalizeAngle(3 * kPi / 2), -kPi / 2, 1e-12);
  EXPECT_NEAR(NormalizeAngle(-5 * kPi / 2), -kPi / 2, 1e-12);
  EXPECT_NEAR(NormalizeAngle(kPi + 0.1), -kPi + 0.1, 1e-12);
}

TEST(IntegrateTrajectory, StraightLineIsExact) {
  const auto traj = IntegrateTrajectory(Constant(2, 0, 0.5, 5), 0.0, {0, 0});
  ASSERT_EQ(traj.points.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(traj.points[i].x, double(i));
    EXPECT_EQ(traj.points[i].y, 0.0);
  }
}

TEST(IntegrateTrajectory, StationaryStaysAtOrigin) {
  const auto traj = IntegrateTrajectory(Constant(0, 0.3, 0.5, 11), 1.1, {3, -4});
  for (const auto& p : traj.points) {
    EXPECT_EQ(p.x, 3.0);
    EXPECT_EQ(p.y, -4.0);
  }
}

TEST(IntegrateTrajectory, UnitArcMatchesClosedForm) {
  // Unit speed on a unit circle for one second: the heading after time t
  // is t, so x = sin t and y = 1 - cos t.
  const auto traj = IntegrateTrajectory(Constant(1, 1, 0.01, 101), 0.0, {0, 0});
  EXPECT_NEAR(traj.points.back().x, std::sin(1.0), 1e-4);
  EXPECT_NEAR(traj.points.back().y, 1.0 - std::cos(1.0), 1e-4);
  EXPECT_NEAR(traj.points.back().x, 0.841471, 1e-4);
  EXPECT_NEAR(traj.points.back().y, 0.459698, 1e-4);
}

TEST(IntegrateTrajectory, HeadingAndOriginAreApplied) {
  const auto traj =
      IntegrateTrajectory(Constant(2, 0, 0.5, 3), kPi / 2, {10, 20});
  EXPECT_NEAR(traj.points[2].x, 10.0, 1e-12);
  EXPECT_NEAR(traj.points[2].y, 22.0, 1e-12);
}

TEST(IntegrateTrajectory, TrapezoidalStepHandComputed) {
  // Two samples: theta_1 = (dt/2)(k0 s0 + k1 s1) = 0.25 * (0 + 1) = 0.25.
  ControlProfile p;
  p.dt = 0.5;
  p.speed = {1.0, 2.0};
  p.curvature = {0.0, 0.5};
  const auto traj = IntegrateTrajectory(p, 0.0, {0, 0});
  const double th1 = 0.25;
  EXPECT_NEAR(traj.points[1].x, 0.25 * (1.0 + 2.0 * std::cos(th1)), 1e-15);
  EXPECT_NEAR(traj.points[1].y, 0.25 * (0.0 + 2.0 * std::sin(th1)), 1e-15);
}

TEST(IntegrateTrajectory, RejectsInvalidProfiles) {
  auto p = Constant(1, 0, 0.5, 4);
  p.speed[2] = std::numeric_limits<double>::quiet_NaN();
  try {
    IntegrateTrajectory(p, 0, {0, 0});
    FAIL();
  } catch (const KinematicsError& e) {
    EXPECT_EQ(e.kind(), KinematicsError::Kind::kNonFiniteInput);
  }
  auto q = Constant(1, 0, 0.5, 4);
  q.curvature[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(IntegrateTrajectory(q, 0, {0, 0}), KinematicsError);
  EXPECT_THROW(IntegrateTrajectory(Constant(1, 0, 0.5, 4), 0,
                                   {std::numeric_limits<double>::quiet_NaN(), 0}),
               KinematicsError);

  auto mismatch = Constant(1, 0, 0.5, 4);
  mismatch.curvature.pop_back();
  EXPECT_THROW(IntegrateTrajectory(mismatch, 0, {0, 0}), KinematicsError);
  EXPECT_THROW(IntegrateTrajectory(Constant(1, 0, 0.5, 1), 0, {0, 0}),
               KinematicsError);
  EXPECT_THROW(IntegrateTrajectory(Constant(-1, 0, 0.5, 3), 0, {0, 0}),
               KinematicsError);
  EXPECT_THROW(IntegrateTrajectory(Constant(1, 0, 0.0, 3), 0, {0, 0}),
               KinematicsError);
}

TEST(IntegrateTrajectory, ZeroCurvatureIsCollinear) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> speed(0.0, 20.0), ang(-kPi, kPi);
  for (int trial = 0; trial < 100; ++trial) {
    ControlProfile p;
    p.dt = 0.5;
    for (int i = 0; i < 11; ++i) {
      p.speed.push_back(speed(rng));
      p.curvature.push_back(0.0);
    }
    const auto pts = IntegrateTrajectory(p, ang(rng), {0, 0}).points;
    EXPECT_EQ(pts.size(), p.size());
    EXPECT_EQ(pts[0], (Point2{0, 0}));
    const Point2 d0{pts.back().x - pts[0].x, pts.back().y - pts[0].y};
    const double len = std::hypot(d0.x, d0.y);
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
      const Point2 d{pts[i].x - pts[0].x, pts[i].y - pts[0].y};
      // Cross product normalised by the overall length keeps the bound
      // meaningful for long trajectories.
      EXPECT_LE(std::abs(d0.x * d.y - d0.y * d.x) / std::max(len, 1.0), 1e-12);
    }
  }
}

TEST(DifferentiateTrajectory, CollinearUnitSpacing) {
  std::vector<Point2> pts;
  for (int i = 0; i < 8; ++i) pts.push_back({double(i), 0.0});
  const auto d = DifferentiateTrajectory(pts, 0.5);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_NEAR(d.profile.speed[i], 2.0, 1e-12);
    EXPECT_EQ(d.profile.curvature[i], 0.0);
    EXPECT_NEAR(d.headings[i], 0.0, 1e-12);
  }
}

TEST(DifferentiateTrajectory, IdenticalPointsHitTheSpeedGuard) {
  const std::vector<Point2> pts(6, Point2{4, 5});
  const auto d = DifferentiateTrajectory(pts, 0.5);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(d.profile.speed[i], 0.0);
    EXPECT_EQ(d.profile.curvature[i], 0.0);
  }
}

TEST(DifferentiateTrajectory, CircleOracle) {
  // Radius 10 m at 5 m/s: curvature 1/10, angular rate 0.5 rad/s.
  const double r = 10.0, v = 5.0, dt = 0.01;
  std::vector<Point2> pts;
  for (int i = 0; i <= 300; ++i) {
    const double a = v / r * i * dt;
    pts.push_back({r * std::sin(a), r * (1 - std::cos(a))});
  }
  const auto d = DifferentiateTrajectory(pts, dt);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_NEAR(d.profile.speed[i], 5.0, 1e-3) << i;
    EXPECT_NEAR(d.profile.curvature[i], 0.1, 1e-3) << i;
  }
}

TEST(DifferentiateTrajectory, UnwrapsHeadingAcrossPi) {
  // Clockwise circle passing through heading +-pi.
  const double r = 5.0, dt = 0.1, w = -0.8;
  std::vector<Point2> pts;
  for (int i = 0; i < 80; ++i) {
    const double a = kPi / 2 + w * i * dt;
    pts.push_back({r * std::cos(a), r * std::sin(a)});
  }
  const auto d = DifferentiateTrajectory(pts, dt);
  for (std::size_t i = 1; i < d.headings.size(); ++i) {
    EXPECT_LT(std::abs(d.headings[i] - d.headings[i - 1]), 0.5);
  }
  for (double k : d.profile.curvature) EXPECT_NEAR(k, -0.2, 2e-3);
}

TEST(DifferentiateTrajectory, Errors) {
  const std::vector<Point2> two{{0, 0}, {1, 0}};
  try {
    DifferentiateTrajectory(two, 0.5);
    FAIL();
  } catch (const KinematicsError& e) {
    EXPECT_EQ(e.kind(), KinematicsError::Kind::kTooFewPoints);
  }
  const std::vector<Point2> bad{{0, 0}, {1, std::nan("")}, {2, 0}};
  try {
    DifferentiateTrajectory(bad, 0.5);
    FAIL();
  } catch (const KinematicsError& e) {
    EXPECT_EQ(e.kind(), KinematicsError::Kind::kNonFiniteInput);
  }
  const std::vector<Point2> ok{{0, 0}, {1, 0}, {2, 0}};
  EXPECT_THROW(DifferentiateTrajectory(ok, 0.0), KinematicsError);
}

TEST(DifferentiateTrajectory, RoundTripRecoversSmoothProfiles) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = testing::SmoothProfile(rng, 0.01, 5.0);
    const auto traj = IntegrateTrajectory(p, 0.3, {1, 2});
    const auto d = DifferentiateTrajectory(traj.points, p.dt);
    EXPECT_LE(MaxAbsDiff(d.profile.speed, p.speed), 1e-3);
    EXPECT_LE(MaxAbsDiff(d.profile.curvature, p.curvature), 1e-2);
    EXPECT_NEAR(d.headings.front(), 0.3, 1e-3);
  }
}

TEST(EgoFrame, WorkedExamples) {
  const std::vector<Point2> g{{3, 4}, {-1, 2}};
  const auto same = ToEgoFrame(g, {0, 0, 0});
  EXPECT_EQ(same[0], g[0]);
  EXPECT_EQ(same[1], g[1]);

  const std::vector<Point2> north{{0, 1}};
  const auto e = ToEgoFrame(north, {0, 0, kPi / 2});
  EXPECT_NEAR(e[0].x, 1.0, 1e-12);
  EXPECT_NEAR(e[0].y, 0.0, 1e-12);

  const std::vector<Point2> ahead{{6, 5}};
  const auto t = ToEgoFrame(ahead, {5, 5, 0});
  EXPECT_EQ(t[0], (Point2{1, 0}));

  // A point to the global west of a north-facing ego is on its left.
  const std::vector<Point2> west{{-2, 0}};
  EXPECT_NEAR(ToEgoFrame(west, {0, 0, kPi / 2})[0].y, 2.0, 1e-12);
}

TEST(EgoFrame, RoundTripAndRigidInvariance) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> c(-500, 500), ang(-kPi, kPi);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Point2> pts(12);
    for (auto& p : pts) p = {c(rng), c(rng)};
    const Pose2D anchor{c(rng), c(rng), NormalizeAngle(ang(rng))};
    const auto ego = ToEgoFrame(pts, anchor);
    const auto back = FromEgoFrame(ego, anchor);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_NEAR(back[i].x, pts[i].x, 1e-9);
      EXPECT_NEAR(back[i].y, pts[i].y, 1e-9);
      for (std::size_t j = 0; j < i; ++j) {
        const double dg = std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
        const double de = std::hypot(ego[i].x - ego[j].x, ego[i].y - ego[j].y);
        EXPECT_NEAR(dg, de, 1e-9);
      }
    }
  }
}

TEST(EgoFrame, RejectsNonFinite) {
  const std::vector<Point2> pts{{std::nan(""), 0}};
  EXPECT_THROW(ToEgoFrame(pts, {0, 0, 0}), KinematicsError);
  const std::vector<Point2> ok{{1, 0}};
  EXPECT_THROW(FromEgoFrame(ok, {0, 0, std::nan("")}), KinematicsError);
}

}  // namespace
}  // namespace cotplan
