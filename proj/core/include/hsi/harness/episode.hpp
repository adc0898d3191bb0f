#pragma once

#include "hsi/harness/scenario.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace hsi::harness {

/// One controller round as recorded in the trace.
struct StepRecord {
  int segment = 0;  ///< 1-based plan step
  int t = 0;        ///< round within the segment
  int mode = 1;
  double e_f = 0.0;
  double e_c = 0.0;
  Matrix2Xr positions;  ///< empty when thinned out by record_every
};

struct SegmentResult {
  int segment = 0;
  int mode = 1;
  double radius = 0.0;
  controller::SegmentTrace trace;
};

struct EpisodeTrace {
  std::string scenario_name;
  planner::Plan plan;
  std::vector<SegmentResult> segments;
  std::vector<StepRecord> steps;
  controller::SwarmState final_state;
  bool converged = false;
  double wall_seconds = 0.0;  ///< kept out of the serialised trace
};

/// Called after every round; return false to cancel the remaining run.
using EpisodeObserver =
    std::function<bool(int segment, int t, int mode, const controller::SwarmState&, const controller::TrackingErrors&)>;

struct SegmentsOutcome {
  controller::SwarmState state;
  std::vector<SegmentResult> segments;
  bool cancelled = false;
};

/// Drives the swarm through every plan step, building each segment's graph
/// from the positions at its start with that step's mode radius.
SegmentsOutcome execute_plan(controller::SwarmState state, const planner::Plan& plan,
                             const controller::ControllerGains& gains, const std::vector<double>& radii,
                             const controller::SegmentLimits& limits, const EpisodeObserver& observer = {});

/// Plan from the scenario's current configuration to its goal, then execute.
/// Planning and controller errors are rethrown with the segment index.
EpisodeTrace run_episode(const Scenario& scenario);

/// JSON-lines trace: header, plan, one line per recorded step, one per
/// segment, then a summary. Contains no timing so identical runs match byte
/// for byte.
void write_trace(const EpisodeTrace& trace, const Scenario& scenario, std::ostream& out);

/// Re-evaluates e_f/e_c from the positions stored in a trace and returns the
/// largest absolute difference to the stored values (0 for exact replay).
double replay_error_mismatch(std::istream& trace);

}  // namespace hsi::harness
