#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotplan/camera.h"
#include "cotplan/kinematics.h"

namespace cotplan {

/// Keyframe rate of the source data (2 Hz).
inline constexpr double kKeyframeDt = 0.5;
inline constexpr double kKeyframeDtTolerance = 0.05;
/// Past samples fed to the reasoning stage (5 s at 2 Hz).
inline constexpr int kHistorySamples = 10;

struct Frame {
  std::int64_t timestamp_us = 0;
  std::string image_path;  // relative to the manifest's directory
  Pose2D ego;
  double ego_z = 0.0;  // carried, unused by planning
  CameraCalibration camera;
};

struct SceneManifest {
  std::string scene_id;
  std::vector<Frame> frames;
  /// Directory the manifest was loaded from; image paths resolve against it.
  std::filesystem::path base_dir;

  std::filesystem::path ImagePath(std::size_t frame_index) const;
};

struct EgoHistory {
  double dt = kKeyframeDt;
  std::vector<double> speed;      // kHistorySamples, oldest first
  std::vector<double> curvature;  // kHistorySamples, oldest first
  double current_speed = 0.0;
  double current_curvature = 0.0;
};

class SceneError : public std::runtime_error {
 public:
  enum class Kind {
    kManifestNotFound,
    kManifestParse,
    kManifestInvalid,
    kInsufficientHistory,
    kInsufficientFuture,
  };

  SceneError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }
  /// Insufficient history/future means "skip this sample", not a failure.
  bool IsSkip() const {
    return kind_ == Kind::kInsufficientHistory ||
           kind_ == Kind::kInsufficientFuture;
  }

 private:
  Kind kind_;
};

/// Loads and eagerly validates a manifest file.
SceneManifest LoadManifest(const std::filesystem::path& path);

/// Parses manifest JSON text; `origin` names the source in error messages.
SceneManifest ParseManifest(const std::string& json_text,
                            const std::string& origin = "<memory>");

/// Serializes to the manifest schema. ParseManifest(SerializeManifest(m))
/// reproduces m (except base_dir).
std::string SerializeManifest(const SceneManifest& manifest);

/// Throws SceneError(kManifestInvalid) on the first violated invariant.
void ValidateManifest(const SceneManifest& manifest);

/// Speed/curvature over the kHistorySamples keyframes before `anchor_index`,
/// plus the anchor's own values, from differentiated global poses.
EgoHistory ComputeEgoHistory(const SceneManifest& scene,
                             std::size_t anchor_index);

/// Next 2*horizon_s keyframe positions in the anchor's ego frame, with
/// (0, 0) prepended as point 0.
Trajectory GroundTruthFuture(const SceneManifest& scene,
                             std::size_t anchor_index, int horizon_s = 5);

/// First frame index with full history and a full future horizon, or -1.
std::ptrdiff_t FirstPlannableAnchor(const SceneManifest& scene,
                                    int horizon_s = 5);

/// Loads every *.json manifest directly under `dir`, sorted by scene_id.
std::vector<SceneManifest> LoadSceneDirectory(const std::filesystem::path& dir);

}  // namespace cotplan
