#include "cotplan/pipeline.h"

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

namespace cotplan {

namespace {

SampleResult Skipped(const SceneManifest& scene, std::string why) {
  SampleResult r;
  r.scene_id = scene.scene_id;
  r.status = SampleStatus::kSkipped;
  r.message = std::move(why);
  return r;
}

PredictionRecord ParseFailedRecord(const SampleResult& r) {
  PredictionRecord rec;
  rec.scene_id = r.scene_id;
  rec.sample_index = r.sample_index;
  rec.failed = true;
  rec.failure_cause = FailureCause::kParseError;
  return rec;
}

}  // namespace

Trajectory TrajectoryFromPrediction(const ParsedPrediction& prediction,
                                    const EgoHistory& history) {
  ControlProfile profile;
  profile.dt = kKeyframeDt;
  profile.speed.reserve(prediction.speed.size() + 1);
  profile.curvature.reserve(prediction.curvature.size() + 1);
  profile.speed.push_back(history.current_speed);
  profile.curvature.push_back(history.current_curvature);
  profile.speed.insert(profile.speed.end(), prediction.speed.begin(),
                       prediction.speed.end());
  profile.curvature.insert(profile.curvature.end(),
                           prediction.curvature.begin(),
                           prediction.curvature.end());
  return IntegrateTrajectory(profile, 0.0, {0.0, 0.0});
}

SampleResult RunScene(const SceneManifest& scene, ChatBackend& backend,
                      const PipelineOptions& options) {
  const PromptTemplates& templates =
      options.templates ? *options.templates : PromptTemplates::Builtin();
  const std::ptrdiff_t anchor = FirstPlannableAnchor(scene, options.horizon_s);
  if (anchor < 0) {
    return Skipped(scene, "needs " +
                              std::to_string(kHistorySamples +
                                             2 * options.horizon_s + 1) +
                              " frames, has " +
                              std::to_string(scene.frames.size()));
  }
  const auto anchor_idx = static_cast<std::size_t>(anchor);

  SampleResult r;
  r.scene_id = scene.scene_id;
  r.sample_index = static_cast<int>(anchor_idx);
  try {
    const EgoHistory history = ComputeEgoHistory(scene, anchor_idx);

    std::vector<FrameImage> images;
    const std::size_t n_frames =
        std::min<std::size_t>(static_cast<std::size_t>(options.frames),
                              anchor_idx + 1);
    for (std::size_t i = anchor_idx + 1 - n_frames; i <= anchor_idx; ++i) {
      images.push_back({scene.ImagePath(i), scene.frames[i].timestamp_us});
    }

    const PromptBundle stage1 = BuildReasoningPrompt(history, images, templates);
    r.reasoning_text = backend.Complete(stage1).text;
    ReasoningOutput reasoning;
    try {
      reasoning = ParseReasoning(r.reasoning_text);
    } catch (const ParseError& e) {
      r.status = SampleStatus::kParseFailed;
      r.message = std::string("reasoning: ") + e.what();
      r.record = ParseFailedRecord(r);
      return r;
    }

    const PromptBundle stage2 =
        BuildPredictionPrompt(reasoning, history, options.horizon_s, templates);
    r.prediction_text = backend.Complete(stage2).text;
    ParsedPrediction prediction;
    try {
      prediction = ParsePrediction(
          r.prediction_text, static_cast<std::size_t>(2 * options.horizon_s));
    } catch (const ParseError& e) {
      r.status = SampleStatus::kParseFailed;
      r.message = std::string("prediction: ") + e.what();
      r.record = ParseFailedRecord(r);
      return r;
    }

    PredictionRecord rec;
    rec.scene_id = r.scene_id;
    rec.sample_index = r.sample_index;
    rec.points = TrajectoryFromPrediction(prediction, history).points;
    r.record = std::move(rec);
    r.status = SampleStatus::kPredicted;
    if (prediction.truncated) r.message = "prediction list truncated";
  } catch (const SceneError& e) {
    if (!e.IsSkip()) throw;
    return Skipped(scene, e.what());
  } catch (const MllmError& e) {
    r.status = SampleStatus::kError;
    r.message = e.what();
    r.record.reset();
  } catch (const PromptError& e) {
    r.status = SampleStatus::kError;
    r.message = e.what();
    r.record.reset();
  }
  return r;
}

PipelineRun RunPipeline(std::span<const SceneManifest> scenes,
                        ChatBackend& backend, const PipelineOptions& options) {
  std::vector<SampleResult> results(scenes.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < scenes.size(); i = next++) {
      results[i] = RunScene(scenes[i], backend, options);
    }
  };
  const int workers = std::clamp<int>(options.workers, 1,
                                      std::max<int>(1, static_cast<int>(scenes.size())));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }

  PipelineRun run;
  for (auto& r : results) {
    if (r.status == SampleStatus::kSkipped) ++run.n_skipped;
    if (r.status == SampleStatus::kError) ++run.n_errors;
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const SampleResult& a, const SampleResult& b) {
                     return std::tie(a.scene_id, a.sample_index) <
                            std::tie(b.scene_id, b.sample_index);
                   });
  run.samples = std::move(results);
  return run;
}

Evaluation EvaluateRecords(std::span<const PredictionRecord> records,
                           std::span<const SceneManifest> scenes,
                           const std::string& model, int n_skipped,
                           L2Mode mode, int horizon_s) {
  std::map<std::string, const SceneManifest*> by_id;
  for (const auto& s : scenes) by_id[s.scene_id] = &s;

  Evaluation ev;
  for (const auto& rec : records) {
    auto it = by_id.find(rec.scene_id);
    if (it == by_id.end()) {
      throw EvalError(EvalError::Kind::kUnknownScene,
                      "prediction references unknown scene_id '" +
                          rec.scene_id + "'");
    }
    SceneScore score;
    if (rec.failure_cause == FailureCause::kParseError) {
      score = ParseFailureScore(rec.scene_id, rec.sample_index);
    } else {
      if (rec.sample_index < 0) {
        throw EvalError(EvalError::Kind::kParse,
                        "negative sample_index for " + rec.scene_id);
      }
      const Trajectory gt = GroundTruthFuture(
          *it->second, static_cast<std::size_t>(rec.sample_index), horizon_s);
      Trajectory pred;
      pred.dt = kKeyframeDt;
      pred.points = rec.points;
      score = ScoreSample(pred, gt, mode);
      score.scene_id = rec.scene_id;
      score.sample_index = rec.sample_index;
    }
    ev.scores.push_back(std::move(score));
  }
  ev.report = Aggregate(ev.scores, model, n_skipped, mode);
  return ev;
}

}  // namespace cotplan
