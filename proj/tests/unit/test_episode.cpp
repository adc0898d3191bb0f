#include "hsi/harness/episode.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>

using namespace hsi;
using namespace hsi::harness;

namespace {

std::filesystem::path scenario_dir() {
  const char* dir = std::getenv("HSI_SCENARIO_DIR");
  return dir ? dir : HSI_DEFAULT_SCENARIO_DIR;
}

std::string trace_text(const Scenario& s) {
  std::ostringstream os;
  write_trace(run_episode(s), s, os);
  return os.str();
}

Scenario small_scenario() {
  return parse_scenario(nlohmann::json::parse(R"({
    "name": "small", "agents": 12, "seed": 4,
    "current": {"shape": [[0, 0], [3, 0], [0, 3]], "scale": 1.0},
    "goal": {"shape": [[0, 0], [2, 0], [2, 2], [0, 2]], "scale": 2.0, "rotation_deg": 30, "centroid": [8, 3]},
    "gains": {"alpha": 0.15, "kp": 0.03},
    "planner": {"horizon": 4, "mode_radii": [4, 20]},
    "limits": {"max_steps": 4000, "tol_f": 1e-3, "tol_c": 1e-3},
    "record_every": 5
  })"));
}

}  // namespace

TEST(Episode, SmallScenarioConverges) {
  const auto s = small_scenario();
  const auto trace = run_episode(s);
  ASSERT_EQ(trace.segments.size(), 4u);
  EXPECT_TRUE(trace.converged);
  const auto& last = trace.segments.back().trace.records.back();
  EXPECT_LT(last.e_f, 1e-3);
  EXPECT_LT(last.e_c, 1e-3);
  EXPECT_EQ(trace.final_state.size(), 12);
  EXPECT_EQ(trace.plan.steps.size(), 4u);
}

TEST(Episode, TracesAreByteIdentical) {
  const auto s = small_scenario();
  const std::string a = trace_text(s);
  const std::string b = trace_text(s);
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
}

TEST(Episode, TraceLayout) {
  const auto s = small_scenario();
  std::istringstream in(trace_text(s));
  std::string line;
  std::vector<std::string> types;
  while (std::getline(in, line)) types.push_back(nlohmann::json::parse(line).at("type").get<std::string>());
  ASSERT_GE(types.size(), 7u);
  EXPECT_EQ(types.front(), "header");
  EXPECT_EQ(types[1], "plan");
  EXPECT_EQ(types.back(), "summary");
  EXPECT_EQ(std::count(types.begin(), types.end(), "segment"), 4);
}

TEST(Episode, ReplayMatchesStoredErrors) {
  const auto s = small_scenario();
  const std::string text = trace_text(s);
  std::istringstream in(text);
  EXPECT_LT(replay_error_mismatch(in), 1e-12);

  // Tamper with one recorded error value.
  std::istringstream src(text);
  std::ostringstream tampered;
  std::string line;
  bool done = false;
  while (std::getline(src, line)) {
    auto j = nlohmann::json::parse(line);
    if (!done && j["type"] == "step" && j.contains("positions")) {
      j["e_f"] = j["e_f"].get<double>() + 0.5;
      done = true;
    }
    tampered << j.dump() << '\n';
  }
  std::istringstream bad(tampered.str());
  EXPECT_NEAR(replay_error_mismatch(bad), 0.5, 1e-9);
}

TEST(Episode, SwarmAlreadyAtGoal) {
  const auto s = load_scenario(scenario_dir() / "minimal.json");
  const auto trace = run_episode(s);
  EXPECT_TRUE(trace.converged);
  for (const auto& seg : trace.segments) EXPECT_EQ(seg.trace.steps_used, 0);
}

TEST(Episode, ObserverCancelsExecution) {
  const auto s = small_scenario();
  const auto plan = planner::plan(planner::hid_from_intention(s.current), s.goal, s.planner);
  int calls = 0;
  const auto out = execute_plan(s.initial_state(), plan, s.gains, s.planner.mode_radii, s.limits,
                                [&](int segment, int, int, const controller::SwarmState&,
                                    const controller::TrackingErrors&) { return ++calls < 3 || segment < 2; });
  EXPECT_TRUE(out.cancelled);
  EXPECT_EQ(out.segments.size(), 2u);
  EXPECT_TRUE(out.segments.back().trace.cancelled);
}

TEST(Episode, ControllerFailureNamesSegment) {
  auto s = small_scenario();
  const auto plan = planner::plan(planner::hid_from_intention(s.current), s.goal, s.planner);
  auto bad = plan;
  bad.steps[2].mode = 7;  // no such radius
  try {
    execute_plan(s.initial_state(), bad, s.gains, s.planner.mode_radii, s.limits);
    FAIL() << "expected PlanningError";
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.step(), 3);
  }
}

TEST(Episode, FiftyAgentMorphScenario) {
  const auto s = load_scenario(scenario_dir() / "paper_fig7.json");
  const auto trace = run_episode(s);
  ASSERT_EQ(trace.segments.size(), 8u);
  EXPECT_TRUE(trace.converged);
  int prev = 1;
  for (const auto& step : trace.plan.steps) {
    EXPECT_GE(step.mode, prev);
    prev = step.mode;
  }
  const auto& last = trace.segments.back().trace.records.back();
  EXPECT_LT(last.e_f, 1e-2);
  EXPECT_LT(last.e_c, 1e-2);
}
