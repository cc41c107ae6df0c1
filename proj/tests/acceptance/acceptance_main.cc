// Acceptance gate: one [PASS]/[FAIL] line per criterion, nonzero exit if
// any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "cotplan/cli.h"
#include "cotplan/detection3d.h"
#include "cotplan/evaluation.h"
#include "cotplan/kinematics.h"
#include "cotplan/pipeline.h"
#include "cotplan/response_parser.h"
#include "json.hpp"
#include "test_util.h"

namespace {

using namespace cotplan;
using Clock = std::chrono::steady_clock;

struct Check {
  bool ok = true;
  std::string detail;

  void Expect(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

double MaxAbsDiff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Check Integrator() {
  Check c;
  const auto start = Clock::now();
  ControlProfile arc;
  arc.dt = 0.01;
  arc.speed.assign(101, 1.0);
  arc.curvature.assign(101, 1.0);
  const auto t = IntegrateTrajectory(arc, 0.0, {0, 0});
  // Closed form for a unit circle: (sin s, 1 - cos s) at s = 1.
  c.Expect(std::abs(t.points.back().x - std::sin(1.0)) < 1e-4 &&
               std::abs(t.points.back().y - (1 - std::cos(1.0))) < 1e-4,
           "arc endpoint off");

  ControlProfile line;
  line.dt = 0.5;
  line.speed.assign(11, 4.0);
  line.curvature.assign(11, 0.0);
  const auto l = IntegrateTrajectory(line, 0.0, {0, 0});
  for (std::size_t i = 0; i < l.points.size(); ++i) {
    c.Expect(std::abs(l.points[i].x - 2.0 * i) <= 1e-12 &&
                 std::abs(l.points[i].y) <= 1e-12,
             "straight line not exact");
  }
  ControlProfile still = line;
  still.speed.assign(11, 0.0);
  still.curvature.assign(11, 0.3);
  for (const auto& p : IntegrateTrajectory(still, 1.0, {3, 4}).points) {
    c.Expect(std::abs(p.x - 3) <= 1e-12 && std::abs(p.y - 4) <= 1e-12,
             "stationary case moved");
  }
  c.Expect(Seconds(start) < 1.0, "slower than 1 s");
  return c;
}

Check RoundTrip() {
  Check c;
  const auto start = Clock::now();
  std::mt19937_64 rng(4242);
  double worst_speed = 0, worst_curv = 0;
  double err_coarse = 0, err_fine = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // Same continuous profile sampled at dt and dt/2.
    std::mt19937_64 fork = rng;
    rng.discard(64);
    std::mt19937_64 fork2 = fork;
    const auto p = testing::SmoothProfile(fork, 0.01, 5.0);
    const auto q = testing::SmoothProfile(fork2, 0.005, 5.0);
    const auto dp = DifferentiateTrajectory(IntegrateTrajectory(p, 0.2, {0, 0}).points, p.dt);
    const auto dq = DifferentiateTrajectory(IntegrateTrajectory(q, 0.2, {0, 0}).points, q.dt);
    const double es = MaxAbsDiff(dp.profile.speed, p.speed);
    const double ek = MaxAbsDiff(dp.profile.curvature, p.curvature);
    worst_speed = std::max(worst_speed, es);
    worst_curv = std::max(worst_curv, ek);
    err_coarse += es + ek;
    err_fine += MaxAbsDiff(dq.profile.speed, q.speed) +
                MaxAbsDiff(dq.profile.curvature, q.curvature);
  }
  const double ratio = err_coarse / err_fine;
  std::ostringstream s;
  s << "speed " << worst_speed << ", curvature " << worst_curv << ", ratio "
    << ratio;
  c.Expect(worst_speed <= 1e-3, "speed error: " + s.str());
  c.Expect(worst_curv <= 1e-2, "curvature error: " + s.str());
  c.Expect(ratio >= 3.0, "convergence ratio: " + s.str());
  c.Expect(Seconds(start) < 10.0, "slower than 10 s");
  if (c.ok) c.detail = s.str();
  return c;
}

Trajectory RandomTrajectory(std::mt19937_64& rng) {
  std::normal_distribution<double> step(0.0, 1.5);
  Trajectory t{0.5, {{0.0, 0.0}}};
  for (int i = 1; i < 11; ++i) {
    t.points.push_back(
        {t.points.back().x + 3.0 + step(rng), t.points.back().y + step(rng)});
  }
  return t;
}

Check MetricOracle() {
  Check c;
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = RandomTrajectory(rng), g = RandomTrajectory(rng);
    std::vector<double> d;
    for (std::size_t i = 0; i < p.points.size(); ++i) {
      const double dx = p.points[i].x - g.points[i].x;
      const double dy = p.points[i].y - g.points[i].y;
      d.push_back(std::sqrt(dx * dx + dy * dy));
    }
    const bool failed = d[1] > 10.0 || d[2] > 10.0;
    const auto s = ScoreSample(p, g);
    c.Expect(s.failed() == failed, "failure flag disagrees");
    if (failed || !s.l2) continue;
    for (int h = 1; h <= 3; ++h) {
      c.Expect(std::abs((*s.l2)[h - 1] - d[2 * h]) <= 1e-9, "L2 disagrees");
    }
  }
  Trajectory gt{0.5, {}};
  for (int i = 0; i < 11; ++i) gt.points.push_back({2.5 * i, 0.0});
  for (double off : {9.99, 10.01}) {
    auto p = gt;
    p.points[2].y = off;
    c.Expect(ScoreSample(p, gt).failed() == (off > 10.0), "boundary case");
  }
  return c;
}

Check Lifting() {
  Check c;
  const auto start = Clock::now();
  const CameraIntrinsics k{1266.0, 1266.0, 800.0, 450.0};
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> tx(-15, 15), ty(-1, 2.5), tz(8, 60),
      yaw(-std::numbers::pi, std::numbers::pi), len(3.5, 5.5), wid(1.6, 2.2),
      hgt(1.4, 2.0), lambda(0.25, 4.0);
  std::vector<double> errors;
  double worst_reproj = 0, worst_scale = 0;
  for (int i = 0; i < 200; ++i) {
    const Box3D truth{{tx(rng), ty(rng), tz(rng)}, {len(rng), wid(rng), hgt(rng)},
                      yaw(rng)};
    const Box2D box = ProjectBox(truth, k).tight;
    const double ray = std::atan2((box.x_min + box.x_max) / 2 - k.cx, k.fx);
    const Detection2D det{0, "car", box, truth.dims, NormalizeAngle(truth.yaw - ray)};
    const auto lifted = LiftBox(det, k);
    errors.push_back(std::hypot(lifted.box.t[0] - truth.t[0],
                                lifted.box.t[1] - truth.t[1],
                                lifted.box.t[2] - truth.t[2]));
    worst_reproj = std::max(worst_reproj, lifted.reprojection_error);

    const double l = lambda(rng);
    const Box3D scaled{{l * truth.t[0], l * truth.t[1], l * truth.t[2]},
                       {l * truth.dims.length, l * truth.dims.width,
                        l * truth.dims.height},
                       truth.yaw};
    const Box2D sb = ProjectBox(scaled, k).tight;
    worst_scale = std::max({worst_scale, std::abs(sb.x_min - box.x_min),
                            std::abs(sb.x_max - box.x_max),
                            std::abs(sb.y_min - box.y_min),
                            std::abs(sb.y_max - box.y_max)});
  }
  std::sort(errors.begin(), errors.end());
  const double median = (errors[99] + errors[100]) / 2;
  std::ostringstream s;
  s << "median " << median << " m, max " << errors.back() << " m, reprojection "
    << worst_reproj << " px, scale " << worst_scale << " px";
  c.Expect(median < 0.1 && errors.back() < 0.5, "centre error: " + s.str());
  c.Expect(worst_reproj < 0.5, "reprojection: " + s.str());
  c.Expect(worst_scale <= 1e-6, "scale equivariance: " + s.str());
  c.Expect(Seconds(start) < 30.0, "slower than 30 s");
  if (c.ok) c.detail = s.str();
  return c;
}

Check Parser() {
  Check c;
  const auto dir = testing::FixturesDir() / "replies";
  int total = 0, ok = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".txt") continue;
    ++total;
    const std::string text = testing::ReadFile(e.path());
    auto exp_path = e.path();
    exp_path.replace_extension(".expected.json");
    const auto expected = nlohmann::json::parse(testing::ReadFile(exp_path));
    try {
      if (expected["kind"] == "reasoning") {
        ParseReasoning(text);
      } else {
        ParsePrediction(text);
      }
      ++ok;
    } catch (const ParseError&) {
    }
  }
  c.Expect(total == 100, "corpus has " + std::to_string(total) + " replies");
  c.Expect(ok * 100 >= total * 95,
           "corpus success " + std::to_string(ok) + "/" + std::to_string(total));

  std::mt19937_64 rng(99991);
  int typed = 0;
  for (int trial = 0; trial < 100000; ++trial) {
    std::string s(rng() % 256, '\0');
    for (char& ch : s) ch = static_cast<char>(rng() & 0xFF);
    try {
      ParsePrediction(s);
    } catch (const ParseError&) {
      ++typed;
    } catch (const std::exception& ex) {
      c.Expect(false, std::string("untyped error: ") + ex.what());
    }
    try {
      ParseReasoning(s);
    } catch (const ParseError&) {
    } catch (const std::exception& ex) {
      c.Expect(false, std::string("untyped error: ") + ex.what());
    }
  }
  if (c.ok) {
    c.detail = "corpus " + std::to_string(ok) + "/" + std::to_string(total) +
               ", 100000 fuzz inputs, " + std::to_string(typed) + " typed errors";
  }
  return c;
}

int RunCli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  std::vector<std::string> full = {"cotplan"};
  full.insert(full.end(), args.begin(), args.end());
  return Dispatch(full, out, err);
}

Check Replay() {
  Check c;
  testing::TempDir dir("cotplan-accept");
  const std::string scenes = testing::ScenesDir().string();
  const std::string store = testing::StorePath().string();
  auto run = [&](const std::string& sub, const std::string& workers) {
    return RunCli({"run", "--scenes", scenes, "--replay", store, "--out",
                   (dir / sub).string(), "--workers", workers});
  };
  c.Expect(run("a", "1") == 0 && run("b", "1") == 0 && run("c", "8") == 0,
           "run failed");
  if (!c.ok) return c;
  for (const char* f : {"predictions.jsonl", "report.json"}) {
    const auto a = testing::ReadFile(dir / "a" / f);
    c.Expect(a == testing::ReadFile(dir / "b" / f), std::string(f) + " differs between runs");
    c.Expect(a == testing::ReadFile(dir / "c" / f), std::string(f) + " differs with 8 workers");
  }
  const auto report = nlohmann::json::parse(testing::ReadFile(dir / "a/report.json"));
  std::set<std::string> cols;
  for (const auto& [key, value] : report["metrics"].items()) cols.insert(key);
  const std::set<std::string> want = {"L2 (m) 1s", "L2 (m) 2s", "L2 (m) 3s",
                                      "L2 (m) avg", "Failure rate (%)"};
  c.Expect(cols == want, "report columns differ");
  const auto lines = testing::CountOccurrences(
      testing::ReadFile(dir / "a/predictions.jsonl"), "\n");
  c.Expect(lines == 5, "expected 5 prediction records");
  return c;
}

// Re-drives the fixture scenes through the scripted replies that built the
// store. Every stage-2 request must embed the parsed stage-1 sections, and
// its fingerprint must be a key in the store, so the recorded stage-2
// prompts are exactly these.
Check Staging() {
  Check c;
  const auto store = ReplayStore::Load(testing::StorePath());
  const PipelineOptions opts;
  int stage2 = 0;
  for (const auto& scene : LoadSceneDirectory(testing::ScenesDir())) {
    const auto anchor = FirstPlannableAnchor(scene, opts.horizon_s);
    if (anchor < 0) continue;
    ReplayBackend replay(std::make_shared<ReplayStore>(store), "gpt-4o", 0.0);
    // Capture the exact requests replay would send.
    struct Tap : ChatBackend {
      ChatBackend& inner;
      std::vector<PromptBundle> seen;
      explicit Tap(ChatBackend& b) : inner(b) {}
      ChatResponse Complete(const PromptBundle& b) override {
        seen.push_back(b);
        return inner.Complete(b);
      }
    } tap(replay);
    RunScene(scene, tap, opts);
    for (std::size_t i = 0; i + 1 < tap.seen.size(); ++i) {
      if (tap.seen[i + 1].stage != PromptStage::kPrediction) continue;
      ++stage2;
      const auto key = Fingerprint(tap.seen[i + 1], "gpt-4o", 0.0);
      c.Expect(store.Contains(key), scene.scene_id + ": stage-2 key not in store");
      const std::string stage1_reply = store.Get(Fingerprint(tap.seen[i], "gpt-4o", 0.0));
      const auto parsed = ParseReasoning(stage1_reply);
      c.Expect(tap.seen[i + 1].user_text.find(RenderStage1Sections(parsed)) !=
                   std::string::npos,
               scene.scene_id + ": stage-1 sections not embedded");
    }
  }
  c.Expect(stage2 == 5, "expected 5 stage-2 requests, saw " + std::to_string(stage2));
  if (c.ok) c.detail = std::to_string(stage2) + " stage-2 requests checked";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Check()>>> criteria = {
      {"Integrator correctness", Integrator},
      {"Round trip differentiate(integrate(p))", RoundTrip},
      {"Metric oracle", MetricOracle},
      {"3D lifting round trip", Lifting},
      {"Parser robustness", Parser},
      {"End-to-end replay determinism", Replay},
      {"Staging contract", Staging},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    failed += !c.ok;
    std::cout << (c.ok ? "[PASS] " : "[FAIL] ") << name;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << "\n";
  }
  return failed ? 1 : 0;
}
