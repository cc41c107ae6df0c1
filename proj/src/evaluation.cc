#include "cotplan/evaluation.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cotplan/scene_data.h"
#include "json.hpp"

namespace cotplan {

namespace {

using nlohmann::json;

constexpr double kAnchorTolerance = 1e-9;

void CheckTrajectory(const Trajectory& t, const char* which) {
  if (std::abs(t.dt - kKeyframeDt) > 1e-9) {
    throw EvalError(EvalError::Kind::kBadTimestep,
                    std::string(which) + " trajectory dt must be 0.5 s");
  }
  const std::size_t need = 2 * kScoredHorizonsS + 1;
  if (t.points.size() < need) {
    throw EvalError(EvalError::Kind::kLengthMismatch,
                    std::string(which) + " trajectory has " +
                        std::to_string(t.points.size()) +
                        " points, need at least " + std::to_string(need));
  }
  const Point2 p0 = t.points.front();
  if (std::abs(p0.x) > kAnchorTolerance || std::abs(p0.y) > kAnchorTolerance) {
    throw EvalError(EvalError::Kind::kBadAnchor,
                    std::string(which) + " trajectory does not start at origin");
  }
  for (const auto& p : t.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw EvalError(EvalError::Kind::kLengthMismatch,
                      std::string(which) + " trajectory has non-finite points");
    }
  }
}

json NumberOrNull(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string CsvNumber(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << v;
  return s.str();
}

}  // namespace

const char* ToString(FailureCause cause) {
  switch (cause) {
    case FailureCause::kNone: return "None";
    case FailureCause::kParseError: return "ParseError";
    case FailureCause::kDivergedOver10m: return "DivergedOver10m";
  }
  return "None";
}

FailureCause FailureCauseFromString(const std::string& name) {
  if (name == "None") return FailureCause::kNone;
  if (name == "ParseError") return FailureCause::kParseError;
  if (name == "DivergedOver10m") return FailureCause::kDivergedOver10m;
  throw std::invalid_argument("unknown failure cause '" + name + "'");
}

const char* ToString(L2Mode mode) {
  return mode == L2Mode::kAde ? "ade" : "point";
}

L2Mode L2ModeFromString(const std::string& name) {
  if (name == "point") return L2Mode::kPoint;
  if (name == "ade") return L2Mode::kAde;
  throw std::invalid_argument("unknown L2 mode '" + name + "'");
}

double SceneScore::l2_avg() const {
  if (!l2) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (double v : *l2) sum += v;
  return sum / kScoredHorizonsS;
}

SceneScore ScoreSample(const Trajectory& pred, const Trajectory& gt,
                       L2Mode mode) {
  CheckTrajectory(pred, "predicted");
  CheckTrajectory(gt, "ground-truth");
  if (pred.points.size() != gt.points.size()) {
    throw EvalError(EvalError::Kind::kLengthMismatch,
                    "predicted and ground-truth lengths differ (" +
                        std::to_string(pred.points.size()) + " vs " +
                        std::to_string(gt.points.size()) + ")");
  }
  auto dist = [&](std::size_t i) {
    return std::hypot(pred.points[i].x - gt.points[i].x,
                      pred.points[i].y - gt.points[i].y);
  };

  SceneScore score;
  const auto window = static_cast<std::size_t>(kFailureWindowS / kKeyframeDt);
  for (std::size_t i = 1; i <= window; ++i) {
    if (dist(i) > kFailureDistance) {
      score.failure_cause = FailureCause::kDivergedOver10m;
      return score;
    }
  }

  std::array<double, kScoredHorizonsS> l2{};
  for (int h = 1; h <= kScoredHorizonsS; ++h) {
    const std::size_t idx = static_cast<std::size_t>(2 * h);
    if (mode == L2Mode::kPoint) {
      l2[h - 1] = dist(idx);
    } else {
      double sum = 0.0;
      for (std::size_t i = 1; i <= idx; ++i) sum += dist(i);
      l2[h - 1] = sum / static_cast<double>(idx);
    }
  }
  score.l2 = l2;
  return score;
}

SceneScore ParseFailureScore(std::string scene_id, int sample_index) {
  SceneScore s;
  s.scene_id = std::move(scene_id);
  s.sample_index = sample_index;
  s.failure_cause = FailureCause::kParseError;
  return s;
}

EvalReport Aggregate(std::span<const SceneScore> scores,
                     const std::string& model, int n_skipped, L2Mode mode) {
  if (scores.empty()) {
    throw EvalError(EvalError::Kind::kEmptyInput, "no scores to aggregate");
  }
  EvalReport r;
  r.model = model;
  r.l2_mode = mode;
  r.n_samples = static_cast<int>(scores.size());
  r.n_skipped = n_skipped;

  std::array<double, kScoredHorizonsS> sums{};
  int survivors = 0;
  for (const auto& s : scores) {
    if (s.failed()) {
      ++r.n_failed;
      continue;
    }
    ++survivors;
    for (int h = 0; h < kScoredHorizonsS; ++h) sums[h] += (*s.l2)[h];
  }
  double avg = 0.0;
  for (int h = 0; h < kScoredHorizonsS; ++h) {
    r.l2_mean[h] = survivors ? sums[h] / survivors
                             : std::numeric_limits<double>::quiet_NaN();
    avg += r.l2_mean[h];
  }
  r.l2_avg = avg / kScoredHorizonsS;
  r.failure_rate = 100.0 * r.n_failed / r.n_samples;
  return r;
}

const std::array<const char*, 5>& ReportColumns() {
  static const std::array<const char*, 5> kColumns = {
      "L2 (m) 1s", "L2 (m) 2s", "L2 (m) 3s", "L2 (m) avg",
      "Failure rate (%)"};
  return kColumns;
}

std::string ReportToJson(const EvalReport& r) {
  const auto& cols = ReportColumns();
  json metrics = json::object();
  for (int h = 0; h < kScoredHorizonsS; ++h) {
    metrics[cols[h]] = NumberOrNull(r.l2_mean[h]);
  }
  metrics[cols[3]] = NumberOrNull(r.l2_avg);
  metrics[cols[4]] = r.failure_rate;
  const json doc = {
      {"model", r.model},
      {"l2_mode", ToString(r.l2_mode)},
      {"n_samples", r.n_samples},
      {"n_skipped", r.n_skipped},
      {"n_failed", r.n_failed},
      {"metrics", std::move(metrics)},
  };
  return doc.dump(2) + "\n";
}

std::string ReportToCsv(const EvalReport& r) {
  std::string out = "Model";
  for (const char* c : ReportColumns()) out += std::string(",") + c;
  out += "\n" + r.model;
  for (int h = 0; h < kScoredHorizonsS; ++h) out += "," + CsvNumber(r.l2_mean[h]);
  out += "," + CsvNumber(r.l2_avg) + "," + CsvNumber(r.failure_rate) + "\n";
  return out;
}

std::string ReportToTable(const EvalReport& r) {
  auto cell = [](double v) {
    if (!std::isfinite(v)) return std::string("-");
    std::ostringstream s;
    s.precision(2);
    s << std::fixed << v;
    return s.str();
  };
  std::string out = "| Model";
  for (const char* c : ReportColumns()) out += std::string(" | ") + c;
  out += " |\n|---|---|---|---|---|---|\n| " + r.model;
  for (int h = 0; h < kScoredHorizonsS; ++h) out += " | " + cell(r.l2_mean[h]);
  out += " | " + cell(r.l2_avg) + " | " + cell(r.failure_rate) + " |\n";
  return out;
}

std::string FormatPredictionRecord(const PredictionRecord& rec) {
  json points = json::array();
  for (const auto& p : rec.points) points.push_back({p.x, p.y});
  const json doc = {
      {"scene_id", rec.scene_id},
      {"sample_index", rec.sample_index},
      {"points", std::move(points)},
      {"failed", rec.failed},
      {"failure_cause", ToString(rec.failure_cause)},
  };
  return doc.dump();
}

std::vector<PredictionRecord> ParsePredictionRecords(const std::string& jsonl) {
  std::vector<PredictionRecord> out;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json doc = json::parse(line);
      PredictionRecord rec;
      rec.scene_id = doc.at("scene_id").get<std::string>();
      rec.sample_index = doc.at("sample_index").get<int>();
      for (const auto& p : doc.at("points")) {
        if (!p.is_array() || p.size() != 2) {
          throw EvalError(EvalError::Kind::kParse, "point must be [x, y]");
        }
        rec.points.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      rec.failed = doc.at("failed").get<bool>();
      rec.failure_cause =
          FailureCauseFromString(doc.at("failure_cause").get<std::string>());
      if (rec.failed != (rec.failure_cause != FailureCause::kNone)) {
        throw EvalError(EvalError::Kind::kParse,
                        "failed flag disagrees with failure_cause");
      }
      out.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw EvalError(EvalError::Kind::kParse,
                      "predictions line " + std::to_string(line_no) + ": " +
                          e.what());
    }
  }
  return out;
}

std::vector<PredictionRecord> LoadPredictionRecords(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw EvalError(EvalError::Kind::kParse,
                    "cannot open predictions " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParsePredictionRecords(buf.str());
}

}  // namespace cotplan
