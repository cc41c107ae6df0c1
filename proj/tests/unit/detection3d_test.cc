#include "cotplan/detection3d.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <set>

#include "cotplan/kinematics.h"
#include "test_util.h"

namespace cotplan {
namespace {

constexpr double kPi = std::numbers::pi;
const CameraIntrinsics kNuscenesLike{1266.0, 1266.0, 800.0, 450.0};

Detection3DError::Kind KindOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Detection3DError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no Detection3DError";
  return Detection3DError::Kind::kParse;
}

/// Independent projection: rotate the 8 sign patterns about camera y and
/// take the pixel extent.
Box2D OracleTightBox(const Box3D& b, const CameraIntrinsics& k) {
  Box2D out{1e300, 1e300, -1e300, -1e300};
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  for (double sx : {-0.5, 0.5}) {
    for (double sy : {-0.5, 0.5}) {
      for (double sz : {-0.5, 0.5}) {
        const double ox = sx * b.dims.length, oy = sy * b.dims.height,
                     oz = sz * b.dims.width;
        const double X = c * ox + s * oz + b.t[0];
        const double Y = oy + b.t[1];
        const double Z = -s * ox + c * oz + b.t[2];
        const double u = k.fx * X / Z + k.cx, v = k.fy * Y / Z + k.cy;
        out.x_min = std::min(out.x_min, u);
        out.x_max = std::max(out.x_max, u);
        out.y_min = std::min(out.y_min, v);
        out.y_max = std::max(out.y_max, v);
      }
    }
  }
  return out;
}

double SideError(const Box2D& a, const Box2D& b) {
  return std::abs(a.x_min - b.x_min) + std::abs(a.y_min - b.y_min) +
         std::abs(a.x_max - b.x_max) + std::abs(a.y_max - b.y_max);
}

TEST(CornerLayout, BitsSelectSignsAndEdgesDifferInOneBit) {
  const BoxDims d{4, 2, 1};
  for (int i = 0; i < 8; ++i) {
    const Vec3 o = CornerOffset(d, i);
    EXPECT_EQ(o[0], (i & 1) ? 2.0 : -2.0);
    EXPECT_EQ(o[1], (i & 2) ? 0.5 : -0.5);
    EXPECT_EQ(o[2], (i & 4) ? 1.0 : -1.0);
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& e : BoxEdges()) {
    const int x = e[0] ^ e[1];
    EXPECT_TRUE(x == 1 || x == 2 || x == 4);
    seen.insert({std::min(e[0], e[1]), std::max(e[0], e[1])});
  }
  EXPECT_EQ(seen.size(), 12u);
}

TEST(ProjectBox, UnitCubePinholeArithmetic) {
  const Box3D cube{{0, 0, 10}, {1, 1, 1}, 0.0};
  const auto p = ProjectBox(cube, {100, 100, 0, 0});
  EXPECT_NEAR(p.tight.x_min, -100 * 0.5 / 9.5, 1e-12);
  EXPECT_NEAR(p.tight.x_max, 100 * 0.5 / 9.5, 1e-12);
  EXPECT_NEAR(p.tight.x_max, 5.263, 1e-3);
  EXPECT_NEAR(p.tight.y_min, -5.263, 1e-3);
}

TEST(ProjectBox, BehindCamera) {
  const Box3D cube{{0, 0, 0.4}, {1, 1, 1}, 0.0};
  EXPECT_EQ(KindOf([&] { ProjectBox(cube, {100, 100, 0, 0}); }),
            Detection3DError::Kind::kBehindCamera);
}

TEST(ProjectBox, QuarterTurnSwapsLengthAndWidth) {
  const CameraIntrinsics k{500, 500, 320, 240};
  const auto a = ProjectBox({{1, 0.5, 15}, {4, 2, 1}, kPi / 2}, k).tight;
  const auto b = ProjectBox({{1, 0.5, 15}, {2, 4, 1}, 0.0}, k).tight;
  EXPECT_NEAR(a.x_min, b.x_min, 1e-9);
  EXPECT_NEAR(a.x_max, b.x_max, 1e-9);
  EXPECT_NEAR(a.y_min, b.y_min, 1e-9);
  EXPECT_NEAR(a.y_max, b.y_max, 1e-9);
}

TEST(ProjectBox, MatchesIndependentOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> tx(-15, 15), tz(8, 60), yaw(-kPi, kPi),
      dim(0.3, 6);
  for (int i = 0; i < 500; ++i) {
    const Box3D b{{tx(rng), tx(rng) / 5, tz(rng)}, {dim(rng), dim(rng), dim(rng)},
                  yaw(rng)};
    const auto p = ProjectBox(b, kNuscenesLike);
    EXPECT_LT(SideError(p.tight, OracleTightBox(b, kNuscenesLike)), 1e-9);
  }
}

TEST(ProjectBox, ScaleEquivariance) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> tx(-10, 10), tz(8, 40), yaw(-kPi, kPi),
      dim(0.5, 5), lambda(0.25, 4);
  for (int i = 0; i < 300; ++i) {
    const Box3D b{{tx(rng), tx(rng) / 4, tz(rng)}, {dim(rng), dim(rng), dim(rng)},
                  yaw(rng)};
    const double l = lambda(rng);
    const Box3D s{{l * b.t[0], l * b.t[1], l * b.t[2]},
                  {l * b.dims.length, l * b.dims.width, l * b.dims.height},
                  b.yaw};
    EXPECT_LT(SideError(ProjectBox(b, kNuscenesLike).tight,
                        ProjectBox(s, kNuscenesLike).tight),
              1e-6);
  }
}

TEST(ProjectBox, InvalidInputs) {
  EXPECT_EQ(KindOf([] { ProjectBox({{0, 0, 10}, {0, 1, 1}, 0}, kNuscenesLike); }),
            Detection3DError::Kind::kInvalidDims);
  EXPECT_EQ(KindOf([] { ProjectBox({{0, 0, 10}, {1, 1, 1}, 0}, {0, 1, 0, 0}); }),
            Detection3DError::Kind::kInvalidIntrinsics);
}

TEST(GlobalYaw, RayAngle) {
  const CameraIntrinsics k{100, 100, 50, 50};
  EXPECT_NEAR(GlobalYaw(0.0, {40, 0, 60, 10}, k), 0.0, 1e-12);
  EXPECT_NEAR(GlobalYaw(0.0, {140, 0, 160, 10}, k), kPi / 4, 1e-12);
  // Centre u = cx + fx*tan(0.1): alpha = pi wraps to -pi + 0.1.
  const double u = 50 + 100 * std::tan(0.1);
  const double y = GlobalYaw(kPi, {u - 5, 0, u + 5, 10}, k);
  EXPECT_NEAR(y, -kPi + 0.1, 1e-12);
  EXPECT_GT(y, -kPi);
  EXPECT_LE(y, kPi);
}

TEST(SolveTranslation, RoundTripExample) {
  const Box3D truth{{1.5, 1.2, 22.0}, {4.5, 1.9, 1.7}, 0.4};
  const Box2D box = OracleTightBox(truth, kNuscenesLike);
  const auto sol = SolveTranslation(box, truth.dims, truth.yaw, kNuscenesLike);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(sol.t[a], truth.t[a], 0.05) << a;
  EXPECT_LT(sol.reprojection_error, 0.5);
  EXPECT_GE(sol.configuration, 0);
  EXPECT_LT(sol.configuration, kCornerConfigurations);
}

TEST(SolveTranslation, ReportedErrorIsTruthful) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> tx(-15, 15), tz(8, 60), yaw(-kPi, kPi),
      noise(-3, 3);
  for (int i = 0; i < 50; ++i) {
    const Box3D truth{{tx(rng), 1.0, tz(rng)}, {4.2, 1.8, 1.6}, yaw(rng)};
    Box2D box = OracleTightBox(truth, kNuscenesLike);
    box.x_min += noise(rng);
    box.y_max += noise(rng);
    const auto sol = SolveTranslation(box, truth.dims, truth.yaw, kNuscenesLike);
    const auto re = ProjectBox({sol.t, truth.dims, truth.yaw}, kNuscenesLike).tight;
    EXPECT_NEAR(SideError(re, box), sol.reprojection_error, 1e-6);
  }
}

TEST(SolveTranslation, DegenerateBoxDoesNotCrash) {
  const Box2D tiny{800, 450, 801, 451};
  const auto sol = SolveTranslation(tiny, {4.5, 1.9, 1.7}, 0.3, kNuscenesLike);
  EXPECT_GT(sol.t[2], 0.0);
  EXPECT_GT(sol.reprojection_error, 0.0);
}

TEST(SolveTranslation, InvalidDimsAndBox) {
  EXPECT_EQ(KindOf([] {
              SolveTranslation({0, 0, 10, 10}, {4, 0, 1}, 0, kNuscenesLike);
            }),
            Detection3DError::Kind::kInvalidDims);
  EXPECT_EQ(KindOf([] {
              SolveTranslation({10, 0, 5, 10}, {4, 2, 1}, 0, kNuscenesLike);
            }),
            Detection3DError::Kind::kInvalidBox);
}

TEST(SolveTranslation, DeterministicIncludingTieBreak) {
  const Box3D truth{{-3, 1, 30}, {2, 2, 2}, 0.0};  // symmetric: many ties
  const Box2D box = OracleTightBox(truth, kNuscenesLike);
  const auto a = SolveTranslation(box, truth.dims, truth.yaw, kNuscenesLike);
  const auto b = SolveTranslation(box, truth.dims, truth.yaw, kNuscenesLike);
  EXPECT_EQ(a.configuration, b.configuration);
  EXPECT_EQ(a.t, b.t);
  EXPECT_EQ(a.reprojection_error, b.reprojection_error);
}

TEST(LiftBox, PassesYawThroughAndSolvesOffImage) {
  const CameraIntrinsics k = kNuscenesLike;
  const Box3D truth{{0.0, 1.0, 20.0}, {4.0, 1.8, 1.5}, kPi / 2};
  const Box2D box = OracleTightBox(truth, k);
  Detection2D det{3, "car", box, truth.dims, 0.0};
  // Centred box: the ray angle is ~0, so alpha ~ yaw.
  det.alpha = kPi / 2 - std::atan2((box.x_min + box.x_max) / 2 - k.cx, k.fx);
  const auto lifted = LiftBox(det, k);
  EXPECT_NEAR(lifted.box.yaw, kPi / 2, 1e-12);
  EXPECT_EQ(lifted.frame, 3);
  EXPECT_EQ(lifted.label, "car");
  EXPECT_NEAR(lifted.box.t[2], 20.0, 0.05);

  // A box partly left of the image still solves.
  const Box3D edge{{-9.0, 1.0, 9.0}, {4.0, 1.8, 1.5}, 0.2};
  const Box2D off = OracleTightBox(edge, k);
  ASSERT_LT(off.x_min, 0.0);
  const double ray = std::atan2((off.x_min + off.x_max) / 2 - k.cx, k.fx);
  Detection2D det2{0, "truck", off, edge.dims, NormalizeAngle(0.2 - ray)};
  const auto l2 = LiftBox(det2, k);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(l2.box.t[a], edge.t[a], 0.05);
}

TEST(DetectionIo, ParseAndFormat) {
  const auto dets = ParseDetections(
      R"({"frame": 2, "class": "pedestrian", "box2d": [10, 20, 30, 80], "dims_lwh": [0.8, 0.6, 1.7], "alpha": 0.25})"
      "\n\n"
      R"({"frame": 5, "class": "car", "box2d": [100, 200, 300, 280], "dims_lwh": [4.5, 1.9, 1.6], "alpha": -1.0})"
      "\n");
  ASSERT_EQ(dets.size(), 2u);
  EXPECT_EQ(dets[0].label, "pedestrian");
  EXPECT_EQ(dets[0].box.y_max, 80.0);
  EXPECT_EQ(dets[0].dims.length, 0.8);
  EXPECT_EQ(dets[0].dims.width, 0.6);
  EXPECT_EQ(dets[0].dims.height, 1.7);
  EXPECT_EQ(dets[1].alpha, -1.0);

  LiftedBox lb{4, "truck", {{1.25, -0.5, 33.0}, {8, 2.5, 3}, 0.75}, 0.125};
  const auto back = ParseLiftedBoxes(FormatLiftedBox(lb) + "\n");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].label, "truck");
  EXPECT_EQ(back[0].box.t, lb.box.t);
  EXPECT_EQ(back[0].box.dims.width, 2.5);
  EXPECT_EQ(back[0].box.yaw, 0.75);
  EXPECT_EQ(back[0].reprojection_error, 0.125);

  EXPECT_EQ(KindOf([] { ParseDetections("{\"frame\": 1}\n"); }),
            Detection3DError::Kind::kParse);
  EXPECT_EQ(KindOf([] { ParseDetections("not json\n"); }),
            Detection3DError::Kind::kParse);
  EXPECT_EQ(KindOf([] {
              ParseDetections(R"({"frame": 0, "class": "car", "box2d": [1, 2, 3], "dims_lwh": [1, 1, 1], "alpha": 0})");
            }),
            Detection3DError::Kind::kParse);
}

}  // namespace
}  // namespace cotplan
