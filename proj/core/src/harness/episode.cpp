#include "hsi/harness/episode.hpp"

#include "hsi/json_io.hpp"

#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace hsi::harness {

using nlohmann::json;

SegmentsOutcome execute_plan(controller::SwarmState state, const planner::Plan& plan,
                             const controller::ControllerGains& gains, const std::vector<double>& radii,
                             const controller::SegmentLimits& limits, const EpisodeObserver& observer) {
  SegmentsOutcome out;
  for (std::size_t l = 0; l < plan.steps.size(); ++l) {
    const auto& step = plan.steps[l];
    const int segment = static_cast<int>(l) + 1;
    controller::StepObserver obs;
    if (observer) {
      obs = [&](int t, const controller::SwarmState& s, const controller::TrackingErrors& e) {
        return observer(segment, t, step.mode, s, e);
      };
    }
    try {
      auto [next, trace] = controller::run_segment(std::move(state), step, gains, radii, limits, obs);
      state = std::move(next);
      const bool cancelled = trace.cancelled;
      out.segments.push_back({segment, step.mode, radii.at(static_cast<std::size_t>(step.mode) - 1), std::move(trace)});
      if (cancelled) {
        out.cancelled = true;
        break;
      }
    } catch (const PlanningError&) {
      throw;
    } catch (const std::exception& e) {
      throw PlanningError("segment " + std::to_string(segment) + ": " + e.what(), segment);
    }
  }
  out.state = std::move(state);
  return out;
}

EpisodeTrace run_episode(const Scenario& scenario) {
  const auto started = std::chrono::steady_clock::now();
  EpisodeTrace trace;
  trace.scenario_name = scenario.name;
  trace.plan = planner::plan(planner::hid_from_intention(scenario.current), scenario.goal, scenario.planner);

  const int every = scenario.record_every;
  auto observer = [&](int segment, int t, int mode, const controller::SwarmState& s,
                      const controller::TrackingErrors& e) {
    StepRecord r{segment, t, mode, e.formation, e.centroid, {}};
    if (t % every == 0) r.positions = s.p;
    trace.steps.push_back(std::move(r));
    return true;
  };
  auto outcome = execute_plan(scenario.initial_state(), trace.plan, scenario.gains, scenario.planner.mode_radii,
                              scenario.limits, observer);
  // Segment ends reappear as t = 0 of the next segment; keep the very last one.
  if (!trace.steps.empty() && trace.steps.back().positions.rows() == 0) trace.steps.back().positions = outcome.state.p;
  trace.segments = std::move(outcome.segments);
  trace.final_state = std::move(outcome.state);
  trace.converged = !trace.segments.empty();
  for (const auto& seg : trace.segments) trace.converged = trace.converged && seg.trace.converged;
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return trace;
}

void write_trace(const EpisodeTrace& trace, const Scenario& scenario, std::ostream& out) {
  out << json{{"type", "header"}, {"scenario", to_json(scenario)}}.dump() << '\n';
  out << json{{"type", "plan"}, {"plan", json_io::to_json(trace.plan)}}.dump() << '\n';
  for (const auto& r : trace.steps) {
    json line{{"type", "step"}, {"segment", r.segment}, {"t", r.t}, {"mode", r.mode}, {"e_f", r.e_f}, {"e_c", r.e_c}};
    if (r.positions.rows() > 0) line["positions"] = json_io::to_json(r.positions);
    out << line.dump() << '\n';
  }
  for (const auto& s : trace.segments) {
    const auto& last = s.trace.records.back();
    out << json{{"type", "segment"},
                {"segment", s.segment},
                {"mode", s.mode},
                {"radius", s.radius},
                {"steps_used", s.trace.steps_used},
                {"converged", s.trace.converged},
                {"e_f", last.e_f},
                {"e_c", last.e_c},
                {"warnings", s.trace.warnings}}
               .dump()
        << '\n';
  }
  json summary{{"type", "summary"}, {"segments", trace.segments.size()}, {"converged", trace.converged}};
  if (!trace.segments.empty()) {
    summary["final_e_f"] = trace.segments.back().trace.records.back().e_f;
    summary["final_e_c"] = trace.segments.back().trace.records.back().e_c;
  }
  out << summary.dump() << '\n';
}

double replay_error_mismatch(std::istream& in) {
  std::vector<controller::PlanStep> steps;
  double worst = 0.0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "plan") {
      for (const auto& s : j.at("plan").at("steps")) steps.push_back(json_io::plan_step_from_json(s));
    } else if (type == "step" && j.contains("positions")) {
      const int segment = j.at("segment").get<int>();
      if (segment < 1 || segment > static_cast<int>(steps.size())) throw InvalidInput("trace step references unknown segment");
      controller::SwarmState s;
      s.p = json_io::matrix_from_json(j.at("positions"));
      const auto e = controller::errors(s, steps[static_cast<std::size_t>(segment) - 1]);
      worst = std::max(worst, std::abs(e.formation - j.at("e_f").get<double>()));
      worst = std::max(worst, std::abs(e.centroid - j.at("e_c").get<double>()));
    }
  }
  return worst;
}

}  // namespace hsi::harness
