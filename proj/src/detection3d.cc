#include "cotplan/detection3d.h"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cotplan/kinematics.h"
#include "json.hpp"

namespace cotplan {

namespace {

using nlohmann::json;

void CheckDims(const BoxDims& d) {
  for (double v : {d.length, d.width, d.height}) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw Detection3DError(Detection3DError::Kind::kInvalidDims,
                             "box dimensions must be positive and finite");
    }
  }
}

void CheckIntrinsics(const CameraIntrinsics& k) {
  if (!k.Valid()) {
    throw Detection3DError(Detection3DError::Kind::kInvalidIntrinsics,
                           "intrinsics need finite values and fx, fy > 0");
  }
}

void CheckBox(const Box2D& b) {
  if (!b.Valid()) {
    throw Detection3DError(Detection3DError::Kind::kInvalidBox,
                           "2D box needs x_min < x_max and y_min < y_max");
  }
}

Vec3 RotateY(const Vec3& p, double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * p[0] + s * p[2], p[1], -s * p[0] + c * p[2]};
}

// Tight box of the corners, or false if a corner is not in front.
bool TightBox(const std::array<Vec3, 8>& corners, const CameraIntrinsics& k,
              Projection* out) {
  Box2D tight{std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity()};
  for (int i = 0; i < 8; ++i) {
    const Vec3& p = corners[i];
    if (!(p[2] > 0.0)) return false;
    const double u = k.fx * p[0] / p[2] + k.cx;
    const double v = k.fy * p[1] / p[2] + k.cy;
    out->corners[i] = {u, v};
    tight.x_min = std::min(tight.x_min, u);
    tight.x_max = std::max(tight.x_max, u);
    tight.y_min = std::min(tight.y_min, v);
    tight.y_max = std::max(tight.y_max, v);
  }
  out->tight = tight;
  return true;
}

Box2D BoxFromArray(const json& a, const std::string& where) {
  if (!a.is_array() || a.size() != 4) {
    throw Detection3DError(Detection3DError::Kind::kParse,
                           where + ": box2d must have 4 numbers");
  }
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>(),
          a[3].get<double>()};
}

BoxDims DimsFromArray(const json& a, const std::string& where) {
  if (!a.is_array() || a.size() != 3) {
    throw Detection3DError(Detection3DError::Kind::kParse,
                           where + ": dims_lwh must have 3 numbers");
  }
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

template <typename Fn>
void ForEachJsonLine(const std::string& jsonl, Fn fn) {
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    try {
      fn(json::parse(line), where);
    } catch (const json::exception& e) {
      throw Detection3DError(Detection3DError::Kind::kParse,
                             where + ": " + e.what());
    }
  }
}

}  // namespace

bool Box2D::Valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) &&
         std::isfinite(x_max) && std::isfinite(y_max) && x_min < x_max &&
         y_min < y_max;
}

Vec3 CornerOffset(const BoxDims& d, int i) {
  return {(i & 1 ? 0.5 : -0.5) * d.length, (i & 2 ? 0.5 : -0.5) * d.height,
          (i & 4 ? 0.5 : -0.5) * d.width};
}

const std::array<std::array<int, 2>, 12>& BoxEdges() {
  static const std::array<std::array<int, 2>, 12> kEdges = [] {
    std::array<std::array<int, 2>, 12> edges{};
    int n = 0;
    for (int a = 0; a < 8; ++a) {
      for (int bit : {1, 2, 4}) {
        if (!(a & bit)) edges[n++] = {a, a | bit};
      }
    }
    return edges;
  }();
  return kEdges;
}

std::array<Vec3, 8> BoxCorners(const Box3D& box) {
  std::array<Vec3, 8> out{};
  for (int i = 0; i < 8; ++i) {
    const Vec3 r = RotateY(CornerOffset(box.dims, i), box.yaw);
    out[i] = {r[0] + box.t[0], r[1] + box.t[1], r[2] + box.t[2]};
  }
  return out;
}

Projection ProjectBox(const Box3D& box, const CameraIntrinsics& k) {
  CheckDims(box.dims);
  CheckIntrinsics(k);
  Projection p;
  if (!TightBox(BoxCorners(box), k, &p)) {
    throw Detection3DError(Detection3DError::Kind::kBehindCamera,
                           "box has a corner at or behind the camera plane");
  }
  return p;
}

double GlobalYaw(double alpha, const Box2D& box, const CameraIntrinsics& k) {
  const double u_center = 0.5 * (box.x_min + box.x_max);
  const double ray = std::atan2(u_center - k.cx, k.fx);
  return NormalizeAngle(alpha + ray);
}

TranslationSolution SolveTranslation(const Box2D& box, const BoxDims& dims,
                                     double yaw, const CameraIntrinsics& k) {
  CheckBox(box);
  CheckDims(dims);
  CheckIntrinsics(k);

  // Side equations: fx*(X+t)_x + (cx-u)*(X+t)_z = 0 for u in {x_min, x_max}
  // and fy*(X+t)_y + (cy-v)*(X+t)_z = 0 for v in {y_min, y_max}. The matrix
  // depends only on the box, so its pseudo-inverse is shared by all configs.
  const std::array<double, 4> side_px = {box.x_min, box.y_min, box.x_max,
                                         box.y_max};
  const std::array<bool, 4> is_u = {true, false, true, false};
  Eigen::Matrix<double, 4, 3> a;
  for (int r = 0; r < 4; ++r) {
    if (is_u[r]) {
      a.row(r) << k.fx, 0.0, k.cx - side_px[r];
    } else {
      a.row(r) << 0.0, k.fy, k.cy - side_px[r];
    }
  }
  const Eigen::ColPivHouseholderQR<Eigen::Matrix<double, 4, 3>> qr(a);
  if (qr.rank() < 3) {
    throw Detection3DError(Detection3DError::Kind::kNoValidConfiguration,
                           "side equations are rank deficient");
  }
  const Eigen::Matrix<double, 3, 4> pinv =
      qr.solve(Eigen::Matrix4d::Identity());

  std::array<Vec3, 8> rotated{};
  for (int i = 0; i < 8; ++i) rotated[i] = RotateY(CornerOffset(dims, i), yaw);

  // Right-hand side contribution of every corner for every side.
  std::array<std::array<double, 8>, 4> rhs{};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 8; ++c) {
      const Vec3& x = rotated[c];
      rhs[r][c] = is_u[r] ? -(k.fx * x[0] + (k.cx - side_px[r]) * x[2])
                          : -(k.fy * x[1] + (k.cy - side_px[r]) * x[2]);
    }
  }

  TranslationSolution best;
  best.reprojection_error = std::numeric_limits<double>::infinity();
  Box3D candidate{{0.0, 0.0, 0.0}, dims, yaw};
  Projection proj;
  for (int config = 0; config < kCornerConfigurations; ++config) {
    const int corner[4] = {config & 7, (config >> 3) & 7, (config >> 6) & 7,
                           (config >> 9) & 7};
    Eigen::Vector4d b;
    for (int r = 0; r < 4; ++r) b[r] = rhs[r][corner[r]];
    const Eigen::Vector3d t = pinv * b;
    if (!(t.z() > 0.0) || !t.allFinite()) continue;

    candidate.t = {t.x(), t.y(), t.z()};
    std::array<Vec3, 8> corners{};
    for (int i = 0; i < 8; ++i) {
      corners[i] = {rotated[i][0] + t.x(), rotated[i][1] + t.y(),
                    rotated[i][2] + t.z()};
    }
    if (!TightBox(corners, k, &proj)) continue;
    const double err = std::abs(proj.tight.x_min - box.x_min) +
                       std::abs(proj.tight.y_min - box.y_min) +
                       std::abs(proj.tight.x_max - box.x_max) +
                       std::abs(proj.tight.y_max - box.y_max);
    if (err < best.reprojection_error) {
      best.reprojection_error = err;
      best.t = candidate.t;
      best.configuration = config;
    }
  }
  if (best.configuration < 0) {
    throw Detection3DError(Detection3DError::Kind::kNoValidConfiguration,
                           "no corner configuration places the box in front "
                           "of the camera");
  }
  return best;
}

LiftedBox LiftBox(const Detection2D& det, const CameraIntrinsics& k) {
  CheckBox(det.box);
  CheckIntrinsics(k);
  const double yaw = GlobalYaw(det.alpha, det.box, k);
  const auto sol = SolveTranslation(det.box, det.dims, yaw, k);
  LiftedBox out;
  out.frame = det.frame;
  out.label = det.label;
  out.box = {sol.t, det.dims, yaw};
  out.reprojection_error = sol.reprojection_error;
  return out;
}

std::vector<Detection2D> ParseDetections(const std::string& jsonl) {
  std::vector<Detection2D> out;
  ForEachJsonLine(jsonl, [&](const json& rec, const std::string& where) {
    Detection2D d;
    d.frame = rec.at("frame").get<int>();
    d.label = rec.at("class").get<std::string>();
    d.box = BoxFromArray(rec.at("box2d"), where);
    d.dims = DimsFromArray(rec.at("dims_lwh"), where);
    d.alpha = rec.at("alpha").get<double>();
    out.push_back(std::move(d));
  });
  return out;
}

std::vector<Detection2D> LoadDetections(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Detection3DError(Detection3DError::Kind::kParse,
                           "cannot open detections " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseDetections(buf.str());
}

std::string FormatLiftedBox(const LiftedBox& b) {
  const json rec = {
      {"frame", b.frame},
      {"class", b.label},
      {"t", b.box.t},
      {"dims_lwh", {b.box.dims.length, b.box.dims.width, b.box.dims.height}},
      {"yaw", b.box.yaw},
      {"reprojection_error", b.reprojection_error},
  };
  return rec.dump();
}

std::vector<LiftedBox> ParseLiftedBoxes(const std::string& jsonl) {
  std::vector<LiftedBox> out;
  ForEachJsonLine(jsonl, [&](const json& rec, const std::string& where) {
    LiftedBox b;
    b.frame = rec.at("frame").get<int>();
    b.label = rec.value("class", "");
    const auto& t = rec.at("t");
    if (!t.is_array() || t.size() != 3) {
      throw Detection3DError(Detection3DError::Kind::kParse,
                             where + ": t must have 3 numbers");
    }
    b.box.t = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
    b.box.dims = DimsFromArray(rec.at("dims_lwh"), where);
    b.box.yaw = rec.at("yaw").get<double>();
    b.reprojection_error = rec.value("reprojection_error", 0.0);
    out.push_back(std::move(b));
  });
  return out;
}

}  // namespace cotplan
