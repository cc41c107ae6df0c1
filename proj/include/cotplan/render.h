#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "cotplan/detection3d.h"
#include "cotplan/kinematics.h"
#include "cotplan/scene_data.h"

namespace cotplan {

class RenderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stroke colour for a detection class; unknown classes get orange.
std::string ClassColor(const std::string& label);

/// Bird's-eye view of predicted (solid) and ground-truth (dashed) ego-frame
/// trajectories, forward pointing up. Objects are drawn as footprints;
/// their camera-frame boxes are moved to the ego frame with `camera` when
/// given, otherwise with a camera at the ego origin looking forward.
std::string RenderBev(const Trajectory& pred, const Trajectory& gt,
                      std::span<const LiftedBox> objects = {},
                      const CameraCalibration* camera = nullptr);

/// Width and height read from a PNG or JPEG header.
std::optional<std::pair<int, int>> ReadImageSize(const std::filesystem::path& path);

/// Camera overlay: ego-frame trajectory points on the ground plane (ego
/// z = 0) are moved into the camera with cam_from_ego and projected; points
/// at or behind the camera plane are dropped. Each box is drawn as its 12
/// projected edges. Throws RenderError on invalid calibration.
std::string RenderOverlay(const Frame& frame,
                          const std::filesystem::path& image_file,
                          const Trajectory& pred,
                          std::span<const LiftedBox> boxes = {});

}  // namespace cotplan
