#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotplan/scene_data.h"

namespace cotplan {

enum class PromptStage { kReasoning, kPrediction };

struct ImageAttachment {
  std::filesystem::path path;
  std::string mime_type;
};

/// Text and images for one chat call.
struct PromptBundle {
  PromptStage stage = PromptStage::kReasoning;
  std::string system_text;
  std::string user_text;
  std::vector<ImageAttachment> images;
};

enum class Maneuver { kStraight, kLeftTurn, kRightTurn, kUnknown };
enum class SpeedIntent { kMaintain, kAccelerate, kDecelerate, kStop, kUnknown };

struct CriticalObject {
  std::string label;
  std::string location_text;
  std::string rationale;
};

/// Structured result of the reasoning stage.
struct ReasoningOutput {
  std::string intent;
  Maneuver intent_maneuver = Maneuver::kUnknown;
  SpeedIntent intent_speed = SpeedIntent::kUnknown;
  std::string scene_description;
  std::vector<CriticalObject> critical_objects;
  /// Major Objects section exactly as the model wrote it. When empty the
  /// section is rendered from critical_objects instead.
  std::string major_objects_text;
};

const char* ToString(Maneuver m);
const char* ToString(SpeedIntent s);

/// Section headings shared with the response parser.
inline constexpr const char* kIntentHeading = "Intent Command";
inline constexpr const char* kSceneHeading = "Scene Description";
inline constexpr const char* kObjectsHeading = "Major Objects";

inline constexpr int kMaxAttachedFrames = 10;

class PromptError : public std::runtime_error {
 public:
  enum class Kind { kTooManyImages, kNoImages, kInvalidInput, kTemplate };

  PromptError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// A pinned set of prompt templates. Placeholders use {{name}} syntax.
struct PromptTemplates {
  std::string version;
  std::string system;
  std::string reasoning;
  std::string prediction;

  /// Templates compiled into the binary from assets/prompts/<version>/.
  static const PromptTemplates& Builtin();
  /// Reads system.txt, reasoning.txt and prediction.txt from `dir`.
  static PromptTemplates LoadFromDirectory(const std::filesystem::path& dir);
};

/// Substitutes every {{name}}; an unknown or unterminated placeholder throws
/// PromptError(kTemplate).
std::string RenderTemplate(const std::string& tmpl,
                           const std::map<std::string, std::string>& values);

/// Fixed two-decimal rendering used for every number in prompts.
std::string FormatPromptNumber(double v);
/// "[a, b, c]" with FormatPromptNumber elements.
std::string FormatPromptList(std::span<const double> values);

struct FrameImage {
  std::filesystem::path path;
  std::int64_t timestamp_us = 0;
};

/// Stage 1. Images are attached sorted by timestamp, newest last.
PromptBundle BuildReasoningPrompt(
    const EgoHistory& history, std::span<const FrameImage> images,
    const PromptTemplates& templates = PromptTemplates::Builtin());

/// Stage 2. Embeds the stage-1 sections and asks for 2 * horizon_s samples.
PromptBundle BuildPredictionPrompt(
    const ReasoningOutput& reasoning, const EgoHistory& history,
    int horizon_s = 5,
    const PromptTemplates& templates = PromptTemplates::Builtin());

/// The three headed sections as they appear inside the stage-2 prompt.
std::string RenderStage1Sections(const ReasoningOutput& reasoning);

/// Guesses a MIME type from the file extension (png, jpg/jpeg, webp, gif).
std::string MimeTypeForPath(const std::filesystem::path& path);

}  // namespace cotplan
