#include "cotplan/cli.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "cotplan/detection3d.h"
#include "cotplan/evaluation.h"
#include "cotplan/mllm_client.h"
#include "cotplan/pipeline.h"
#include "cotplan/render.h"
#include "cotplan/response_parser.h"
#include "cotplan/scene_data.h"

namespace cotplan {

namespace {

namespace fs = std::filesystem;

/// Raised for invalid flag combinations detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void WriteFile(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int SkippedScenes(std::span<const SceneManifest> scenes, int horizon_s) {
  int n = 0;
  for (const auto& s : scenes) {
    if (FirstPlannableAnchor(s, horizon_s) < 0) ++n;
  }
  return n;
}

const char* StatusName(SampleStatus s) {
  switch (s) {
    case SampleStatus::kPredicted: return "predicted";
    case SampleStatus::kParseFailed: return "parse-failed";
    case SampleStatus::kSkipped: return "skipped";
    case SampleStatus::kError: return "error";
  }
  return "?";
}

void WriteReport(const fs::path& out_dir, const EvalReport& report,
                 std::ostream& out) {
  WriteFile(out_dir / "report.json", ReportToJson(report));
  WriteFile(out_dir / "report.csv", ReportToCsv(report));
  out << ReportToTable(report);
  out << "samples: " << report.n_samples << ", failed: " << report.n_failed
      << ", skipped: " << report.n_skipped << "\n";
}

// --- run ----------------------------------------------------------------------

struct RunArgs {
  std::string scenes;
  std::string out;
  std::string model = "gpt-4o";
  std::string base_url;
  std::string replay;
  std::string record;
  std::string prompts;
  int frames = 1;
  int horizon = 5;
  int workers = 1;
  std::string l2_mode = "point";
  double temperature = 0.0;
  int max_tokens = 1024;
  int timeout_s = 120;
  int max_retries = 3;
};

int CmdRun(const RunArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.replay.empty() && !a.record.empty()) {
    throw UsageError("--replay and --record are mutually exclusive");
  }
  const auto scenes = LoadSceneDirectory(a.scenes);

  ClientConfig cfg;
  cfg.base_url = a.base_url;
  cfg.model = a.model;
  cfg.temperature = a.temperature;
  cfg.max_tokens = a.max_tokens;
  cfg.timeout = std::chrono::seconds(a.timeout_s);
  cfg.max_retries = a.max_retries;
  cfg.ApplyEnvironment();

  std::unique_ptr<ChatBackend> backend;
  std::unique_ptr<ChatBackend> live;
  std::unique_ptr<RecordStore> record_store;
  if (!a.replay.empty()) {
    auto store = std::make_shared<const ReplayStore>(ReplayStore::Load(a.replay));
    backend = std::make_unique<ReplayBackend>(store, cfg.model, cfg.temperature);
  } else {
    if (cfg.base_url.empty()) {
      throw UsageError("no endpoint: pass --base-url or set OPENEMMA_BASE_URL");
    }
    try {
      cfg.Validate();
    } catch (const MllmError& e) {
      throw UsageError(e.what());
    }
    live = std::make_unique<OpenAiChatClient>(cfg);
    if (!a.record.empty()) {
      record_store = std::make_unique<RecordStore>(a.record);
      backend = std::make_unique<RecordingBackend>(*live, *record_store,
                                                   cfg.model, cfg.temperature);
    }
  }
  ChatBackend& chat = backend ? *backend : *live;

  std::optional<PromptTemplates> templates;
  PipelineOptions opts;
  opts.frames = a.frames;
  opts.horizon_s = a.horizon;
  opts.workers = a.workers;
  opts.l2_mode = L2ModeFromString(a.l2_mode);
  if (!a.prompts.empty()) {
    templates = PromptTemplates::LoadFromDirectory(a.prompts);
    opts.templates = &*templates;
  }

  const PipelineRun run = RunPipeline(scenes, chat, opts);

  std::string jsonl;
  std::vector<PredictionRecord> records;
  for (const auto& s : run.samples) {
    if (s.status != SampleStatus::kPredicted) {
      err << s.scene_id << " [" << StatusName(s.status) << "]: " << s.message
          << "\n";
    }
    if (!s.record) continue;
    jsonl += FormatPredictionRecord(*s.record) + "\n";
    records.push_back(*s.record);
  }
  const fs::path out_dir(a.out);
  WriteFile(out_dir / "predictions.jsonl", jsonl);

  if (records.empty()) {
    err << "no scene produced a prediction; report not written\n";
    return kExitDataError;
  }
  const auto ev = EvaluateRecords(records, scenes, cfg.model,
                                  run.n_skipped + run.n_errors,
                                  opts.l2_mode, opts.horizon_s);
  WriteReport(out_dir, ev.report, out);
  if (run.n_errors > 0) {
    err << run.n_errors << " scene(s) could not be queried\n";
    return kExitDataError;
  }
  return kExitOk;
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string predictions;
  std::string scenes;
  std::string out;
  std::string model = "gpt-4o";
  std::string l2_mode = "point";
  int horizon = 5;
};

int CmdEval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  const auto scenes = LoadSceneDirectory(a.scenes);
  const auto records = LoadPredictionRecords(a.predictions);
  const L2Mode mode = L2ModeFromString(a.l2_mode);
  const auto ev = EvaluateRecords(records, scenes, a.model,
                                  SkippedScenes(scenes, a.horizon), mode,
                                  a.horizon);
  WriteReport(a.out, ev.report, out);
  return kExitOk;
}

// --- lift ---------------------------------------------------------------------

struct LiftArgs {
  std::string detections;
  std::string out;
  std::string manifest;
  std::vector<double> intrinsics;
};

int CmdLift(const LiftArgs& a, std::ostream& out, std::ostream& err) {
  if (a.manifest.empty() == a.intrinsics.empty()) {
    throw UsageError("pass exactly one of --manifest or --intrinsics");
  }
  std::optional<SceneManifest> scene;
  CameraIntrinsics fixed;
  if (!a.manifest.empty()) {
    scene = LoadManifest(a.manifest);
  } else {
    fixed = {a.intrinsics[0], a.intrinsics[1], a.intrinsics[2], a.intrinsics[3]};
  }

  const auto dets = LoadDetections(a.detections);
  std::string jsonl;
  int failures = 0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto& d = dets[i];
    try {
      CameraIntrinsics k = fixed;
      if (scene) {
        if (d.frame < 0 || static_cast<std::size_t>(d.frame) >= scene->frames.size()) {
          throw std::out_of_range("frame " + std::to_string(d.frame) +
                                  " not in manifest");
        }
        k = scene->frames[static_cast<std::size_t>(d.frame)].camera.intrinsics;
      }
      jsonl += FormatLiftedBox(LiftBox(d, k)) + "\n";
    } catch (const std::exception& e) {
      ++failures;
      err << "detection " << i << " (frame " << d.frame << ", " << d.label
          << "): " << e.what() << "\n";
    }
  }
  WriteFile(a.out, jsonl);
  out << "lifted " << dets.size() - failures << " of " << dets.size()
      << " detections\n";
  return failures ? kExitDataError : kExitOk;
}

// --- render -------------------------------------------------------------------

struct RenderArgs {
  std::string predictions;
  std::string scenes;
  std::string out;
  std::string boxes;
  int horizon = 5;
};

int CmdRender(const RenderArgs& a, std::ostream& out, std::ostream& err) {
  const auto scenes = LoadSceneDirectory(a.scenes);
  std::map<std::string, const SceneManifest*> by_id;
  for (const auto& s : scenes) by_id[s.scene_id] = &s;
  const auto records = LoadPredictionRecords(a.predictions);
  std::vector<LiftedBox> boxes;
  if (!a.boxes.empty()) boxes = ParseLiftedBoxes(ReadFile(a.boxes));

  const fs::path out_dir(a.out);
  int written = 0;
  for (const auto& rec : records) {
    auto it = by_id.find(rec.scene_id);
    if (it == by_id.end()) {
      throw EvalError(EvalError::Kind::kUnknownScene,
                      "prediction references unknown scene_id '" +
                          rec.scene_id + "'");
    }
    if (rec.failed) {
      err << rec.scene_id << ": failed sample, nothing to render\n";
      continue;
    }
    const SceneManifest& scene = *it->second;
    const auto idx = static_cast<std::size_t>(rec.sample_index);
    if (idx >= scene.frames.size()) {
      throw EvalError(EvalError::Kind::kParse,
                      "sample_index out of range for " + rec.scene_id);
    }
    Trajectory pred{kKeyframeDt, rec.points};
    std::vector<LiftedBox> frame_boxes;
    for (const auto& b : boxes) {
      if (b.frame == rec.sample_index) frame_boxes.push_back(b);
    }
    const Frame& frame = scene.frames[idx];
    const std::string stem = rec.scene_id + "_" + std::to_string(idx);
    Trajectory gt = GroundTruthFuture(scene, idx, a.horizon);
    WriteFile(out_dir / (stem + "_bev.svg"),
              RenderBev(pred, gt, frame_boxes, &frame.camera));
    fs::path image = fs::absolute(scene.ImagePath(idx)).lexically_normal();
    fs::path href = image.lexically_relative(fs::absolute(out_dir));
    if (href.empty()) href = image;
    // Size sniffing reads the real file; the SVG references it relatively.
    std::string svg = RenderOverlay(frame, image, pred, frame_boxes);
    const std::string abs = image.generic_string();
    if (auto pos = svg.find(abs); pos != std::string::npos) {
      svg.replace(pos, abs.size(), href.generic_string());
    }
    WriteFile(out_dir / (stem + "_overlay.svg"), svg);
    written += 2;
  }
  out << "wrote " << written << " SVG files to " << out_dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int Dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Chain-of-thought trajectory planning toolkit", "cotplan"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  RunArgs run;
  auto* cmd_run = app.add_subcommand(
      "run", "Query the model for every scene and write predictions + report");
  cmd_run->add_option("--scenes", run.scenes, "Directory of scene manifests")
      ->required()->check(CLI::ExistingDirectory);
  cmd_run->add_option("--out", run.out, "Output directory")->required();
  cmd_run->add_option("--model", run.model, "Model name")->capture_default_str();
  cmd_run->add_option("--base-url", run.base_url,
                      "OpenAI-compatible endpoint (env OPENEMMA_BASE_URL)");
  cmd_run->add_option("--frames", run.frames, "Camera frames per prompt")
      ->check(CLI::Range(1, kMaxAttachedFrames))->capture_default_str();
  cmd_run->add_option("--horizon", run.horizon, "Prediction horizon in seconds")
      ->check(CLI::Range(kScoredHorizonsS, 20))->capture_default_str();
  cmd_run->add_option("--l2-mode", run.l2_mode, "point or ade")
      ->check(CLI::IsMember({"point", "ade"}))->capture_default_str();
  auto* replay = cmd_run->add_option("--replay", run.replay,
                                     "Answer from a recorded response store")
                     ->check(CLI::ExistingFile);
  auto* record = cmd_run->add_option("--record", run.record,
                                     "Append live responses to this store");
  replay->excludes(record);
  cmd_run->add_option("--workers", run.workers, "Concurrent scenes")
      ->check(CLI::Range(1, 256))->capture_default_str();
  cmd_run->add_option("--prompts", run.prompts, "Prompt template directory")
      ->check(CLI::ExistingDirectory);
  cmd_run->add_option("--temperature", run.temperature)->capture_default_str();
  cmd_run->add_option("--max-tokens", run.max_tokens)->capture_default_str();
  cmd_run->add_option("--timeout", run.timeout_s, "Request timeout in seconds")
      ->capture_default_str();
  cmd_run->add_option("--max-retries", run.max_retries)->capture_default_str();

  EvalArgs ev;
  auto* cmd_eval =
      app.add_subcommand("eval", "Score a predictions file against manifests");
  cmd_eval->add_option("--predictions", ev.predictions, "Predictions JSONL")
      ->required()->check(CLI::ExistingFile);
  cmd_eval->add_option("--scenes", ev.scenes, "Directory of scene manifests")
      ->required()->check(CLI::ExistingDirectory);
  cmd_eval->add_option("--out", ev.out, "Output directory")->required();
  cmd_eval->add_option("--model", ev.model, "Model name for the report")
      ->capture_default_str();
  cmd_eval->add_option("--l2-mode", ev.l2_mode, "point or ade")
      ->check(CLI::IsMember({"point", "ade"}))->capture_default_str();
  cmd_eval->add_option("--horizon", ev.horizon)
      ->check(CLI::Range(kScoredHorizonsS, 20))->capture_default_str();

  LiftArgs lift;
  auto* cmd_lift = app.add_subcommand(
      "lift", "Lift 2D detections with dimensions and alpha to 3D boxes");
  cmd_lift->add_option("--detections", lift.detections, "Detections JSONL")
      ->required()->check(CLI::ExistingFile);
  cmd_lift->add_option("--out", lift.out, "Output JSONL")->required();
  auto* manifest = cmd_lift->add_option("--manifest", lift.manifest,
                                        "Scene manifest with per-frame intrinsics")
                       ->check(CLI::ExistingFile);
  auto* intr = cmd_lift->add_option("--intrinsics", lift.intrinsics,
                                    "fx,fy,cx,cy")
                   ->delimiter(',')->expected(4);
  manifest->excludes(intr);

  RenderArgs rr;
  auto* cmd_render = app.add_subcommand("render", "Write BEV and overlay SVGs");
  cmd_render->add_option("--predictions", rr.predictions, "Predictions JSONL")
      ->required()->check(CLI::ExistingFile);
  cmd_render->add_option("--scenes", rr.scenes, "Directory of scene manifests")
      ->required()->check(CLI::ExistingDirectory);
  cmd_render->add_option("--out", rr.out, "Output directory")->required();
  cmd_render->add_option("--boxes", rr.boxes, "Lifted boxes JSONL")
      ->check(CLI::ExistingFile);
  cmd_render->add_option("--horizon", rr.horizon)
      ->check(CLI::Range(kScoredHorizonsS, 20))->capture_default_str();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*cmd_run) return CmdRun(run, out, err);
    if (*cmd_eval) return CmdEval(ev, out, err);
    if (*cmd_lift) return CmdLift(lift, out, err);
    if (*cmd_render) return CmdRender(rr, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  }
  return kExitUsage;
}

}  // namespace cotplan
