#include "cotplan/prompting.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "prompt_assets.h"

namespace cotplan {

namespace {

void CheckHistory(const EgoHistory& h) {
  if (h.speed.size() != static_cast<std::size_t>(kHistorySamples) ||
      h.curvature.size() != static_cast<std::size_t>(kHistorySamples)) {
    throw PromptError(PromptError::Kind::kInvalidInput,
                      "history must hold exactly " +
                          std::to_string(kHistorySamples) + " samples");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(h.speed.begin(), h.speed.end(), finite) ||
      !std::all_of(h.curvature.begin(), h.curvature.end(), finite) ||
      !std::isfinite(h.current_speed) || !std::isfinite(h.current_curvature)) {
    throw PromptError(PromptError::Kind::kInvalidInput,
                      "history contains non-finite values");
  }
}

std::string FormatShortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

std::map<std::string, std::string> HistoryValues(const EgoHistory& h) {
  return {
      {"speed_history", FormatPromptList(h.speed)},
      {"curvature_history", FormatPromptList(h.curvature)},
      {"current_speed", FormatPromptNumber(h.current_speed)},
      {"current_curvature", FormatPromptNumber(h.current_curvature)},
      {"history_seconds",
       std::to_string(static_cast<int>(std::lround(h.dt * kHistorySamples)))},
      {"dt", FormatShortest(h.dt)},
  };
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw PromptError(PromptError::Kind::kTemplate,
                      "cannot read template " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const char* ToString(Maneuver m) {
  switch (m) {
    case Maneuver::kStraight: return "Straight";
    case Maneuver::kLeftTurn: return "LeftTurn";
    case Maneuver::kRightTurn: return "RightTurn";
    case Maneuver::kUnknown: break;
  }
  return "Unknown";
}

const char* ToString(SpeedIntent s) {
  switch (s) {
    case SpeedIntent::kMaintain: return "Maintain";
    case SpeedIntent::kAccelerate: return "Accelerate";
    case SpeedIntent::kDecelerate: return "Decelerate";
    case SpeedIntent::kStop: return "Stop";
    case SpeedIntent::kUnknown: break;
  }
  return "Unknown";
}

const PromptTemplates& PromptTemplates::Builtin() {
  static const PromptTemplates kBuiltin{
      std::string(prompt_assets::kVersion),
      std::string(prompt_assets::kSystem),
      std::string(prompt_assets::kReasoning),
      std::string(prompt_assets::kPrediction),
  };
  return kBuiltin;
}

PromptTemplates PromptTemplates::LoadFromDirectory(
    const std::filesystem::path& dir) {
  return {dir.filename().string(), ReadFile(dir / "system.txt"),
          ReadFile(dir / "reasoning.txt"), ReadFile(dir / "prediction.txt")};
}

std::string RenderTemplate(const std::string& tmpl,
                           const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t pos = 0;
  while (true) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) {
      throw PromptError(PromptError::Kind::kTemplate,
                        "unterminated placeholder in template");
    }
    const std::string name = tmpl.substr(open + 2, close - open - 2);
    const auto it = values.find(name);
    if (it == values.end()) {
      throw PromptError(PromptError::Kind::kTemplate,
                        "unknown placeholder {{" + name + "}}");
    }
    out.append(tmpl, pos, open - pos);
    out += it->second;
    pos = close + 2;
  }
  return out;
}

std::string FormatPromptNumber(double v) {
  char buf[64];
  auto [end, ec] =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  if (ec != std::errc()) return "nan";
  std::string s(buf, end);
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string FormatPromptList(std::span<const double> values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += FormatPromptNumber(values[i]);
  }
  out += "]";
  return out;
}

std::string MimeTypeForPath(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "application/octet-stream";
}

PromptBundle BuildReasoningPrompt(const EgoHistory& history,
                                  std::span<const FrameImage> images,
                                  const PromptTemplates& templates) {
  CheckHistory(history);
  if (images.empty()) {
    throw PromptError(PromptError::Kind::kNoImages,
                      "reasoning prompt needs at least one image");
  }
  if (images.size() > static_cast<std::size_t>(kMaxAttachedFrames)) {
    throw PromptError(PromptError::Kind::kTooManyImages,
                      "at most " + std::to_string(kMaxAttachedFrames) +
                          " images, got " + std::to_string(images.size()));
  }
  std::vector<FrameImage> ordered(images.begin(), images.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const FrameImage& a, const FrameImage& b) {
                     return a.timestamp_us < b.timestamp_us;
                   });

  PromptBundle bundle;
  bundle.stage = PromptStage::kReasoning;
  bundle.system_text = templates.system;
  bundle.user_text = RenderTemplate(templates.reasoning, HistoryValues(history));
  for (const auto& img : ordered) {
    bundle.images.push_back({img.path, MimeTypeForPath(img.path)});
  }
  return bundle;
}

std::string RenderStage1Sections(const ReasoningOutput& r) {
  std::string objects = r.major_objects_text;
  if (objects.empty()) {
    for (const auto& o : r.critical_objects) {
      objects += "- " + o.label;
      if (!o.location_text.empty()) objects += ", " + o.location_text;
      if (!o.rationale.empty()) objects += ": " + o.rationale;
      objects += "\n";
    }
  }
  return std::string(kIntentHeading) + ":\n" + Trim(r.intent) + "\n\n" +
         kSceneHeading + ":\n" + Trim(r.scene_description) + "\n\n" +
         kObjectsHeading + ":\n" + Trim(objects);
}

PromptBundle BuildPredictionPrompt(const ReasoningOutput& reasoning,
                                   const EgoHistory& history, int horizon_s,
                                   const PromptTemplates& templates) {
  CheckHistory(history);
  if (horizon_s <= 0) {
    throw PromptError(PromptError::Kind::kInvalidInput,
                      "horizon must be positive");
  }
  if (Trim(reasoning.intent).empty() ||
      Trim(reasoning.scene_description).empty()) {
    throw PromptError(PromptError::Kind::kInvalidInput,
                      "reasoning output has empty sections");
  }
  auto values = HistoryValues(history);
  values["stage1_sections"] = RenderStage1Sections(reasoning);
  values["horizon_points"] = std::to_string(2 * horizon_s);
  values["horizon_seconds"] = std::to_string(horizon_s);

  PromptBundle bundle;
  bundle.stage = PromptStage::kPrediction;
  bundle.system_text = templates.system;
  bundle.user_text = RenderTemplate(templates.prediction, values);
  return bundle;
}

}  // namespace cotplan
