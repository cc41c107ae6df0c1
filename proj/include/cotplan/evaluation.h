#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cotplan/kinematics.h"

namespace cotplan {

/// A prediction is a failure if it strays more than this many metres from
/// the ground truth at any waypoint within the first second.
inline constexpr double kFailureDistance = 10.0;
inline constexpr double kFailureWindowS = 1.0;
inline constexpr int kScoredHorizonsS = 3;

enum class FailureCause { kNone, kParseError, kDivergedOver10m };

const char* ToString(FailureCause cause);
/// Throws std::invalid_argument for unknown names.
FailureCause FailureCauseFromString(const std::string& name);

/// How the "L2 at h seconds" columns are computed.
enum class L2Mode {
  kPoint,  // displacement at the waypoint h seconds out
  kAde,    // mean displacement over all waypoints up to h seconds
};

const char* ToString(L2Mode mode);
L2Mode L2ModeFromString(const std::string& name);

struct SceneScore {
  std::string scene_id;
  int sample_index = 0;
  /// l2[h-1] is the value at h seconds; present iff not failed.
  std::optional<std::array<double, kScoredHorizonsS>> l2;
  FailureCause failure_cause = FailureCause::kNone;

  bool failed() const { return failure_cause != FailureCause::kNone; }
  double l2_avg() const;
};

class EvalError : public std::runtime_error {
 public:
  enum class Kind { kLengthMismatch, kBadAnchor, kBadTimestep, kEmptyInput,
                    kParse, kUnknownScene };

  EvalError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Scores one prediction against ground truth. Both trajectories must use
/// dt = 0.5 s, start at (0, 0) and cover at least 3 s.
SceneScore ScoreSample(const Trajectory& pred, const Trajectory& gt,
                       L2Mode mode = L2Mode::kPoint);

/// Score for a sample whose model reply could not be parsed.
SceneScore ParseFailureScore(std::string scene_id, int sample_index);

struct EvalReport {
  std::string model;
  L2Mode l2_mode = L2Mode::kPoint;
  int n_samples = 0;
  int n_skipped = 0;
  int n_failed = 0;
  /// NaN when every sample failed.
  std::array<double, kScoredHorizonsS> l2_mean{};
  double l2_avg = 0.0;
  double failure_rate = 0.0;  // percent
};

/// Means over surviving samples; failure rate over all scored samples.
/// Skipped samples never enter the denominators.
EvalReport Aggregate(std::span<const SceneScore> scores,
                     const std::string& model, int n_skipped = 0,
                     L2Mode mode = L2Mode::kPoint);

/// Report column names, in table order.
const std::array<const char*, 5>& ReportColumns();

std::string ReportToJson(const EvalReport& report);
std::string ReportToCsv(const EvalReport& report);
/// One markdown table row (with header) for terminal output.
std::string ReportToTable(const EvalReport& report);

/// One line of the predictions JSONL file.
struct PredictionRecord {
  std::string scene_id;
  int sample_index = 0;
  std::vector<Point2> points;
  bool failed = false;
  FailureCause failure_cause = FailureCause::kNone;
};

std::string FormatPredictionRecord(const PredictionRecord& rec);
std::vector<PredictionRecord> ParsePredictionRecords(const std::string& jsonl);
std::vector<PredictionRecord> LoadPredictionRecords(
    const std::filesystem::path& path);

}  // namespace cotplan
