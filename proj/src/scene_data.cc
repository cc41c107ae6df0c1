#include "cotplan/scene_data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace cotplan {

namespace {

using nlohmann::json;

[[noreturn]] void ParseFail(const std::string& origin, const std::string& msg) {
  throw SceneError(SceneError::Kind::kManifestParse, origin + ": " + msg);
}

[[noreturn]] void Invalid(const std::string& msg) {
  throw SceneError(SceneError::Kind::kManifestInvalid, msg);
}

// Walks a JSON value and reports missing or mistyped fields with their path.
class FieldReader {
 public:
  FieldReader(const json& node, std::string path, const std::string& origin)
      : node_(node), path_(std::move(path)), origin_(origin) {
    if (!node_.is_object()) ParseFail(origin_, path_ + " is not an object");
  }

  FieldReader Object(const char* key) const {
    return FieldReader(Get(key), path_ + "." + key, origin_);
  }

  double Number(const char* key) const {
    const json& v = Get(key);
    if (!v.is_number()) ParseFail(origin_, Where(key) + " is not a number");
    return v.get<double>();
  }

  std::int64_t Integer(const char* key) const {
    const json& v = Get(key);
    if (!v.is_number_integer()) {
      ParseFail(origin_, Where(key) + " is not an integer");
    }
    return v.get<std::int64_t>();
  }

  std::string String(const char* key) const {
    const json& v = Get(key);
    if (!v.is_string()) ParseFail(origin_, Where(key) + " is not a string");
    return v.get<std::string>();
  }

  template <std::size_t N>
  std::array<double, N> Numbers(const char* key) const {
    const json& v = Get(key);
    if (!v.is_array() || v.size() != N) {
      ParseFail(origin_,
                Where(key) + " must be an array of " + std::to_string(N));
    }
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
      if (!v[i].is_number()) {
        ParseFail(origin_, Where(key) + "[" + std::to_string(i) +
                               "] is not a number");
      }
      out[i] = v[i].get<double>();
    }
    return out;
  }

 private:
  const json& Get(const char* key) const {
    auto it = node_.find(key);
    if (it == node_.end()) ParseFail(origin_, "missing field " + Where(key));
    return *it;
  }

  std::string Where(const char* key) const { return path_ + "." + key; }

  const json& node_;
  std::string path_;
  const std::string& origin_;
};

Frame ParseFrame(const json& node, std::size_t index,
                 const std::string& origin) {
  FieldReader f(node, "frames[" + std::to_string(index) + "]", origin);
  Frame frame;
  frame.timestamp_us = f.Integer("timestamp_us");
  frame.image_path = f.String("image_path");
  auto ego = f.Object("ego");
  frame.ego.x = ego.Number("x");
  frame.ego.y = ego.Number("y");
  frame.ego_z = ego.Number("z");
  frame.ego.yaw = ego.Number("yaw");
  auto cam = f.Object("camera");
  frame.camera.intrinsics.fx = cam.Number("fx");
  frame.camera.intrinsics.fy = cam.Number("fy");
  frame.camera.intrinsics.cx = cam.Number("cx");
  frame.camera.intrinsics.cy = cam.Number("cy");
  auto extr = cam.Object("cam_from_ego");
  frame.camera.cam_from_ego.t = extr.Numbers<3>("t");
  frame.camera.cam_from_ego.q_wxyz = extr.Numbers<4>("q_wxyz");
  return frame;
}

std::vector<Point2> GlobalXY(const SceneManifest& scene, std::size_t first,
                             std::size_t last) {
  std::vector<Point2> out;
  out.reserve(last - first + 1);
  for (std::size_t i = first; i <= last; ++i) {
    out.push_back({scene.frames[i].ego.x, scene.frames[i].ego.y});
  }
  return out;
}

}  // namespace

std::filesystem::path SceneManifest::ImagePath(std::size_t frame_index) const {
  return base_dir / frames.at(frame_index).image_path;
}

SceneManifest ParseManifest(const std::string& json_text,
                            const std::string& origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    ParseFail(origin, std::string("invalid JSON: ") + e.what());
  }
  FieldReader root(doc, "$", origin);
  SceneManifest scene;
  scene.scene_id = root.String("scene_id");
  auto frames = doc.find("frames");
  if (frames == doc.end() || !frames->is_array()) {
    ParseFail(origin, "missing field $.frames (array)");
  }
  scene.frames.reserve(frames->size());
  for (std::size_t i = 0; i < frames->size(); ++i) {
    scene.frames.push_back(ParseFrame((*frames)[i], i, origin));
  }
  ValidateManifest(scene);
  return scene;
}

void ValidateManifest(const SceneManifest& scene) {
  if (scene.scene_id.empty()) Invalid("empty scene_id");
  const std::string where = "scene " + scene.scene_id + ": ";
  if (scene.frames.empty()) Invalid(where + "no frames");
  for (std::size_t i = 0; i < scene.frames.size(); ++i) {
    const Frame& f = scene.frames[i];
    const std::string at = where + "frame " + std::to_string(i) + ": ";
    if (f.image_path.empty()) Invalid(at + "empty image_path");
    for (double v : {f.ego.x, f.ego.y, f.ego.yaw, f.ego_z}) {
      if (!std::isfinite(v)) Invalid(at + "non-finite ego pose");
    }
    if (f.ego.yaw <= -std::numbers::pi || f.ego.yaw > std::numbers::pi) {
      Invalid(at + "ego yaw not normalized to (-pi, pi]");
    }
    if (!f.camera.intrinsics.Valid()) Invalid(at + "bad intrinsics");
    const double qn = f.camera.cam_from_ego.QuaternionNorm();
    if (!std::isfinite(qn) ||
        std::abs(qn - 1.0) > kQuaternionNormTolerance) {
      Invalid(at + "bad quaternion (norm " + std::to_string(qn) + ")");
    }
    for (double v : f.camera.cam_from_ego.t) {
      if (!std::isfinite(v)) Invalid(at + "non-finite extrinsic translation");
    }
    if (i == 0) continue;
    const std::int64_t step = f.timestamp_us - scene.frames[i - 1].timestamp_us;
    if (step <= 0) Invalid(at + "non-monotonic timestamps");
    const double step_s = static_cast<double>(step) * 1e-6;
    if (std::abs(step_s - kKeyframeDt) > kKeyframeDtTolerance + 1e-12) {
      Invalid(at + "frame spacing " + std::to_string(step_s) +
              " s outside 0.5 +/- 0.05 s");
    }
  }
}

SceneManifest LoadManifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw SceneError(SceneError::Kind::kManifestNotFound,
                     "manifest not found: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  SceneManifest scene = ParseManifest(buf.str(), path.string());
  scene.base_dir = path.parent_path();
  return scene;
}

std::string SerializeManifest(const SceneManifest& scene) {
  json frames = json::array();
  for (const Frame& f : scene.frames) {
    const auto& k = f.camera.intrinsics;
    const auto& e = f.camera.cam_from_ego;
    frames.push_back({
        {"timestamp_us", f.timestamp_us},
        {"image_path", f.image_path},
        {"ego", {{"x", f.ego.x}, {"y", f.ego.y}, {"z", f.ego_z},
                 {"yaw", f.ego.yaw}}},
        {"camera",
         {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
          {"cam_from_ego", {{"t", e.t}, {"q_wxyz", e.q_wxyz}}}}},
    });
  }
  json doc = {{"scene_id", scene.scene_id}, {"frames", std::move(frames)}};
  return doc.dump(2) + "\n";
}

EgoHistory ComputeEgoHistory(const SceneManifest& scene,
                             std::size_t anchor_index) {
  if (anchor_index < static_cast<std::size_t>(kHistorySamples)) {
    throw SceneError(SceneError::Kind::kInsufficientHistory,
                     "scene " + scene.scene_id + ": anchor " +
                         std::to_string(anchor_index) + " has fewer than " +
                         std::to_string(kHistorySamples) + " past keyframes");
  }
  if (anchor_index >= scene.frames.size()) {
    throw std::out_of_range("anchor index beyond scene length");
  }
  const auto xy = GlobalXY(scene, anchor_index - kHistorySamples, anchor_index);
  const auto diff = DifferentiateTrajectory(xy, kKeyframeDt);

  EgoHistory h;
  h.dt = kKeyframeDt;
  h.speed.assign(diff.profile.speed.begin(),
                 diff.profile.speed.begin() + kHistorySamples);
  h.curvature.assign(diff.profile.curvature.begin(),
                     diff.profile.curvature.begin() + kHistorySamples);
  h.current_speed = diff.profile.speed.back();
  h.current_curvature = diff.profile.curvature.back();
  return h;
}

Trajectory GroundTruthFuture(const SceneManifest& scene,
                             std::size_t anchor_index, int horizon_s) {
  const std::size_t steps = static_cast<std::size_t>(2 * horizon_s);
  if (horizon_s <= 0 || anchor_index >= scene.frames.size() ||
      anchor_index + steps >= scene.frames.size()) {
    throw SceneError(SceneError::Kind::kInsufficientFuture,
                     "scene " + scene.scene_id + ": anchor " +
                         std::to_string(anchor_index) + " lacks " +
                         std::to_string(steps) + " future keyframes");
  }
  const auto global = GlobalXY(scene, anchor_index + 1, anchor_index + steps);
  auto ego = ToEgoFrame(global, scene.frames[anchor_index].ego);

  Trajectory out;
  out.dt = kKeyframeDt;
  out.points.reserve(steps + 1);
  out.points.push_back({0.0, 0.0});
  out.points.insert(out.points.end(), ego.begin(), ego.end());
  return out;
}

std::ptrdiff_t FirstPlannableAnchor(const SceneManifest& scene, int horizon_s) {
  const std::size_t need =
      static_cast<std::size_t>(kHistorySamples + 2 * horizon_s + 1);
  if (horizon_s <= 0 || scene.frames.size() < need) return -1;
  return kHistorySamples;
}

std::vector<SceneManifest> LoadSceneDirectory(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw SceneError(SceneError::Kind::kManifestNotFound,
                     "scene directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<SceneManifest> scenes;
  scenes.reserve(files.size());
  for (const auto& f : files) scenes.push_back(LoadManifest(f));
  std::sort(scenes.begin(), scenes.end(),
            [](const SceneManifest& a, const SceneManifest& b) {
              return a.scene_id < b.scene_id;
            });
  for (std::size_t i = 1; i < scenes.size(); ++i) {
    if (scenes[i].scene_id == scenes[i - 1].scene_id) {
      throw SceneError(SceneError::Kind::kManifestInvalid,
                       "duplicate scene_id " + scenes[i].scene_id);
    }
  }
  return scenes;
}

}  // namespace cotplan
