#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotplan/camera.h"

namespace cotplan {

/// Pixel-space rectangle; requires x_min < x_max and y_min < y_max.
struct Box2D {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool Valid() const;
};

/// Object extents in metres: length along the object's heading, width
/// across it, height along camera y.
struct BoxDims {
  double length = 0.0;  // d_x
  double width = 0.0;   // d_y
  double height = 0.0;  // d_z
};

/// 7-parameter box in the camera frame (x right, y down, z forward). The
/// centre is the geometric centre; yaw rotates about the camera y axis.
struct Box3D {
  Vec3 t{0.0, 0.0, 0.0};
  BoxDims dims;
  double yaw = 0.0;
};

class Detection3DError : public std::runtime_error {
 public:
  enum class Kind { kBehindCamera, kNoValidConfiguration, kInvalidDims,
                    kInvalidBox, kInvalidIntrinsics, kParse };

  Detection3DError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Object-frame corner offset for corner index `i` (0..7). Bit 0 selects
/// the sign along length (x), bit 1 along height (y), bit 2 along width
/// (z); a set bit means the positive half-extent.
Vec3 CornerOffset(const BoxDims& dims, int i);

/// Corner pairs that form the 12 cuboid edges (indices differ in one bit).
const std::array<std::array<int, 2>, 12>& BoxEdges();

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

struct Projection {
  std::array<PixelPoint, 8> corners;
  Box2D tight;
};

/// Camera-frame corners of `box` (rotation R_y(yaw) then translation).
std::array<Vec3, 8> BoxCorners(const Box3D& box);

/// Projects the 8 corners with the pinhole model and takes their extent.
/// Throws kBehindCamera if any corner has z <= 0.
Projection ProjectBox(const Box3D& box, const CameraIntrinsics& k);

/// Global yaw from the observation angle: alpha plus the angle of the ray
/// through the box centre, wrapped to (-pi, pi].
double GlobalYaw(double alpha, const Box2D& box, const CameraIntrinsics& k);

struct TranslationSolution {
  Vec3 t{0.0, 0.0, 0.0};
  /// Sum of absolute differences between the reprojected tight box sides
  /// and the input box sides, in pixels.
  double reprojection_error = 0.0;
  /// Winning corner assignment: xmin + 8*ymin + 64*xmax + 512*ymax.
  int configuration = -1;
};

inline constexpr int kCornerConfigurations = 8 * 8 * 8 * 8;

/// Recovers the box centre from the tight-enclosure constraint. Every one
/// of the 4096 assignments of corners to the four box sides yields a 4x3
/// linear system in t; each least-squares solution in front of the camera
/// is reprojected and the one closest to `box` wins (ties go to the lowest
/// configuration index).
TranslationSolution SolveTranslation(const Box2D& box, const BoxDims& dims,
                                     double yaw, const CameraIntrinsics& k);

struct Detection2D {
  int frame = 0;
  std::string label;
  Box2D box;
  BoxDims dims;
  double alpha = 0.0;
};

struct LiftedBox {
  int frame = 0;
  std::string label;
  Box3D box;
  double reprojection_error = 0.0;
};

/// GlobalYaw followed by SolveTranslation.
LiftedBox LiftBox(const Detection2D& det, const CameraIntrinsics& k);

/// Detection JSONL: {"frame","class","box2d":[4],"dims_lwh":[3],"alpha"}.
std::vector<Detection2D> LoadDetections(const std::filesystem::path& path);
std::vector<Detection2D> ParseDetections(const std::string& jsonl);

/// Output JSONL: {"frame","class","t":[3],"dims_lwh":[3],"yaw",
/// "reprojection_error"}.
std::string FormatLiftedBox(const LiftedBox& box);
std::vector<LiftedBox> ParseLiftedBoxes(const std::string& jsonl);

}  // namespace cotplan
