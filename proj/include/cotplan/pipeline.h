#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cotplan/evaluation.h"
#include "cotplan/mllm_client.h"
#include "cotplan/prompting.h"
#include "cotplan/response_parser.h"
#include "cotplan/scene_data.h"

namespace cotplan {

struct PipelineOptions {
  /// Front-camera frames attached to the reasoning prompt (1..10), newest
  /// being the anchor frame.
  int frames = 1;
  int horizon_s = 5;
  int workers = 1;
  L2Mode l2_mode = L2Mode::kPoint;
  const PromptTemplates* templates = nullptr;  // null: builtin
};

enum class SampleStatus {
  kPredicted,    // trajectory produced
  kParseFailed,  // a model reply could not be parsed
  kSkipped,      // scene lacks history or future
  kError,        // model unreachable, replay miss, unreadable image, ...
};

struct SampleResult {
  std::string scene_id;
  int sample_index = -1;
  SampleStatus status = SampleStatus::kSkipped;
  std::optional<PredictionRecord> record;  // kPredicted / kParseFailed
  std::string message;                     // reason for anything else
  std::string reasoning_text;
  std::string prediction_text;
};

/// One scene through both stages: history -> reasoning prompt -> reply ->
/// prediction prompt -> reply -> parsed controls -> integrated trajectory.
/// The anchor is the first frame with full history and future. The
/// current speed/curvature are prepended before integrating from the ego
/// origin with zero heading.
SampleResult RunScene(const SceneManifest& scene, ChatBackend& backend,
                      const PipelineOptions& options);

struct PipelineRun {
  /// Sorted by (scene_id, sample_index).
  std::vector<SampleResult> samples;
  int n_skipped = 0;
  int n_errors = 0;
};

/// Runs every scene with a bounded worker pool; the output order never
/// depends on the worker count.
PipelineRun RunPipeline(std::span<const SceneManifest> scenes,
                        ChatBackend& backend, const PipelineOptions& options);

/// Predicted trajectory from parsed model output.
Trajectory TrajectoryFromPrediction(const ParsedPrediction& prediction,
                                    const EgoHistory& history);

struct Evaluation {
  std::vector<SceneScore> scores;
  EvalReport report;
};

/// Scores prediction records against ground truth recomputed from the
/// manifests. Throws EvalError(kUnknownScene) for unknown scene ids.
Evaluation EvaluateRecords(std::span<const PredictionRecord> records,
                           std::span<const SceneManifest> scenes,
                           const std::string& model, int n_skipped,
                           L2Mode mode, int horizon_s = 5);

}  // namespace cotplan
