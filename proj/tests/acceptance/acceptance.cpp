// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include "hsi/controller.hpp"
#include "hsi/decoder.hpp"
#include "hsi/geom.hpp"
#include "hsi/harness/episode.hpp"
#include "hsi/netgraph.hpp"
#include "hsi/planner.hpp"

#include "oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace hsi;
using namespace hsi::controller;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::filesystem::path g_scenarios;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Matrix2Xr random_matrix(std::mt19937_64& rng, int m, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix2Xr x(m, 2);
  for (int i = 0; i < m; ++i) x.row(i) << n(rng), n(rng);
  return x;
}

PlanStep random_step(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> u(-5, 5);
  PlanStep step;
  step.z = random_matrix(rng, m, 1.0);
  step.z.rowwise() -= step.z.colwise().mean();
  step.scale = 0.5 + std::abs(u(rng));
  step.rotation = u(rng);
  step.centroid = Point2(u(rng), u(rng));
  return step;
}

struct RandomCase {
  netgraph::CommGraph graph;
  Matrix2Xr positions;
};

/// M in [3, 12] agents uniform in a 10 x 10 box, nu-disk graph with nu in
/// [lo, hi], redrawn until connected.
RandomCase random_connected_case(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_int_distribution<int> size(3, 12);
  std::uniform_real_distribution<double> radius(lo, hi);
  const int m = size(rng);
  const double nu = radius(rng);
  const Matrix2Xr p = oracle::random_connected_positions(rng, m, nu, 10.0);
  return {netgraph::build_nu_disk_graph(p, nu), p};
}

Outcome fixed_point() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_connected_case(rng, 3.0, 10.0);
    const auto sys = assemble_system(c.graph, {}, random_step(rng, c.graph.size()));
    worst = std::max(worst, (sys.a * sys.x_desired + sys.f - sys.x_desired).norm());
  }
  return {worst <= 1e-9, fmt("max residual %.2e over 100 graphs", worst)};
}

Outcome distributed_equals_dense() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_connected_case(rng, 3.0, 10.0);
    const int m = c.graph.size();
    const auto step = random_step(rng, m);
    const SwarmState s{random_matrix(rng, m, 3.0), random_matrix(rng, m, 0.5), random_matrix(rng, m, 3.0),
                       random_matrix(rng, m, 3.0)};
    const Eigen::Matrix2d rot = rotation(step.rotation);
    SwarmState swept = s;
    for (int i = 0; i < m; ++i) {
      std::vector<NeighborMessage> inbox;
      for (int j = 0; j < m; ++j)
        if (c.graph.adjacency(i, j))
          inbox.push_back({(s.p.row(j) + s.v.row(j)).transpose(), s.c_hat.row(j).transpose(),
                           rot * step.z.row(j).transpose(), c.graph.weights(i, j)});
      const AgentState out = agent_step({s.p.row(i).transpose(), s.v.row(i).transpose(), s.c_hat.row(i).transpose(),
                                         s.q.row(i).transpose()},
                                        inbox, rot * step.z.row(i).transpose(), step, {});
      swept.p.row(i) = out.p.transpose();
      swept.v.row(i) = out.v.transpose();
      swept.c_hat.row(i) = out.c_hat.transpose();
      swept.q.row(i) = out.q.transpose();
    }
    const auto sys = assemble_system(c.graph, {}, step);
    worst = std::max(worst, (sys.a * stack(s) + sys.f - stack(swept)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-9, fmt("max difference %.2e over 100 cases", worst)};
}

Outcome gain_sufficiency() {
  // Radii below about 5 in this box give graphs whose slowest mode needs more
  // than 5000 steps to reach 1e-6 even though they are stable.
  std::mt19937_64 rng(303);
  int converged = 0, certified = 0, rejected = 0, worst_steps = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_connected_case(rng, 5.0, 10.0);
    const int m = c.graph.size();
    const auto sp = netgraph::spectral_summary(c.graph);
    const double bound = stability_gain_bound(sp, 0.15, 0.0).kp_max;
    const double kp = 0.9 * bound;
    certified += stability_gain_bound(sp, 0.15, kp).is_m_matrix ? 1 : 0;
    rejected += stability_gain_bound(sp, 0.15, 1.5 * bound).is_m_matrix ? 0 : 1;
    const auto step = random_step(rng, m);
    const auto [state, trace] =
        run_segment_on_graph(SwarmState::at_rest(c.positions), c.graph, step, {0.15, kp}, {5000, 1e-6, 1e-6});
    if (trace.converged) ++converged;
    worst_steps = std::max(worst_steps, trace.steps_used);
  }
  return {converged == 20 && certified == 20 && rejected == 20,
          fmt("converged %d/20 (worst %d steps), certified %d/20, 1.5x bound rejected %d/20", converged, worst_steps,
              certified, rejected)};
}

Outcome radius_trend() {
  const auto z = geom::fill_polygon_uniform(geom::Polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}}), 30).z;
  PlanStep step;
  step.z = z;
  step.scale = 10.0;
  const Matrix2Xr goal = step.placement();
  const std::vector<double> radii{2.5, 5.0, 15.0};
  std::vector<double> medians;
  std::string detail;
  bool all_converged = true;
  for (double nu : radii) {
    const auto graph = netgraph::build_nu_disk_graph(goal, nu);
    std::vector<int> steps;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      const Matrix2Xr start = goal + random_matrix(rng, 30, 1.0);
      const auto [state, trace] =
          run_segment_on_graph(SwarmState::at_rest(start), graph, step, {0.15, 0.03}, {20000, 1e-6, 1e-6});
      all_converged = all_converged && trace.converged;
      steps.push_back(trace.steps_used);
    }
    std::sort(steps.begin(), steps.end());
    medians.push_back(0.5 * (steps[9] + steps[10]));
    detail += fmt("nu=%g median %.1f; ", nu, medians.back());
  }
  const bool ordered = std::is_sorted(medians.rbegin(), medians.rend());
  return {ordered && all_converged, detail + (all_converged ? "all runs converged" : "some runs did not converge")};
}

Outcome centroid_estimator() {
  std::mt19937_64 rng(505);
  double conservation = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_connected_case(rng, 3.0, 10.0);
    const int m = c.graph.size();
    const auto step = random_step(rng, m);
    SwarmState s = SwarmState::at_rest(c.positions);
    for (int t = 0; t < 200; ++t) {
      const Matrix2Xr p_prev = s.p;
      s = step_swarm(s, c.graph, step, {});
      conservation = std::max(conservation, (s.c_hat.colwise().mean() - p_prev.colwise().mean()).norm());
    }
  }
  double frozen = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_connected_case(rng, 3.0, 10.0);
    const Matrix2Xr p = c.positions;
    Matrix2Xr c_hat = p;
    for (int t = 0; t < 20000; ++t) c_hat = centroid_estimate_step(c_hat, p, p, c.graph.weights);
    const Eigen::RowVector2d centroid = p.colwise().mean();
    frozen = std::max(frozen, (c_hat.rowwise() - centroid).rowwise().norm().maxCoeff());
  }
  return {conservation <= 1e-12 && frozen <= 1e-6,
          fmt("conservation error %.2e, frozen-swarm estimate error %.2e", conservation, frozen)};
}

Outcome lqr_oracle() {
  auto scalar = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
  double worst = 0.0;
  for (int n = 1; n <= 5; ++n) {
    const auto sol = planner::riccati_lqr(scalar(1), scalar(1), scalar(1), scalar(100), scalar(1500), n);
    const auto dp = oracle::dp_lqr_gains(scalar(1), scalar(1), scalar(1), scalar(100), scalar(1500), n);
    for (int k = 0; k < n; ++k)
      worst = std::max(worst, (sol.gains[static_cast<std::size_t>(k)] - dp[static_cast<std::size_t>(k)]).cwiseAbs().maxCoeff());
  }
  std::mt19937_64 rng(606);
  std::normal_distribution<double> g(0.0, 1.0);
  auto rand = [&](double shift) {
    Eigen::MatrixXd x(2, 2);
    x << g(rng), g(rng), g(rng), g(rng);
    return shift > 0 ? Eigen::MatrixXd(x * x.transpose() + shift * Eigen::MatrixXd::Identity(2, 2)) : x;
  };
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 5;
    const auto a = rand(0), b = rand(0), q = rand(0.1), r = rand(0.5), qf = rand(0.1);
    const auto sol = planner::riccati_lqr(a, b, q, r, qf, n);
    const auto dp = oracle::dp_lqr_gains(a, b, q, r, qf, n);
    for (int k = 0; k < n; ++k)
      worst = std::max(worst, (sol.gains[static_cast<std::size_t>(k)] - dp[static_cast<std::size_t>(k)]).cwiseAbs().maxCoeff());
  }
  const double k0 = planner::riccati_lqr(scalar(1), scalar(1), scalar(1), scalar(100), scalar(1500), 1).gains[0](0, 0);
  const double k0_dp = oracle::dp_lqr_gains(scalar(1), scalar(1), scalar(1), scalar(100), scalar(1500), 1)[0](0, 0);
  const bool example = std::abs(k0 - 0.9375) <= 1e-9 && std::abs(k0_dp - 0.9375) <= 1e-9;
  return {worst <= 1e-9 && example, fmt("max gain difference %.2e; K(0) = %.10f (oracle %.10f)", worst, k0, k0_dp)};
}

Outcome morph_scenario() {
  const auto s = harness::load_scenario(g_scenarios / "paper_fig7.json");
  const auto trace = harness::run_episode(s);
  const auto& plan = trace.plan;
  const auto [from, to] =
      planner::align_states(planner::hid_from_intention(s.current), planner::hid_from_intention(s.goal));
  const Eigen::VectorXd target = to.to_vector();
  bool simple = plan.hid_states.size() == 9;
  bool monotone = true;
  double previous = (plan.hid_states.front().to_vector() - target).norm();
  for (std::size_t l = 1; l < plan.hid_states.size(); ++l) {
    try {
      plan.hid_states[l].polygon();
    } catch (const InvalidShape&) {
      simple = false;
    }
    const double err = (plan.hid_states[l].to_vector() - target).norm();
    monotone = monotone && err < previous;
    previous = err;
  }
  std::vector<int> modes, switches;
  std::string schedule;
  for (std::size_t l = 0; l < plan.steps.size(); ++l) {
    modes.push_back(plan.steps[l].mode);
    schedule += std::to_string(plan.steps[l].mode);
    if (l > 0 && modes[l] != modes[l - 1]) switches.push_back(static_cast<int>(l) + 1);
  }
  const bool sorted = std::is_sorted(modes.begin(), modes.end());
  const bool switch_steps =
      switches.size() == 2 && std::abs(switches[0] - 2) <= 1 && std::abs(switches[1] - 7) <= 1;
  const auto& last = trace.segments.back().trace.records.back();
  const bool converged = trace.converged && trace.segments.size() == 8;
  const bool small = last.e_f < 1e-2 && last.e_c < 1e-2;
  return {simple && monotone && sorted && switch_steps && converged && small,
          fmt("simple %d, monotone %d, schedule %s, segments converged %d, final e_f %.2e e_c %.2e", simple, monotone,
              schedule.c_str(), converged, last.e_f, last.e_c)};
}

Outcome hmm() {
  using namespace hsi::decoder;
  bool monotone = true;
  int runs = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    SynthConfig cfg;
    cfg.mean_separation = 1.0 + static_cast<double>(seed);
    const auto s = synth_session(seed, training_protocol(3.0), {}, cfg);
    const auto frames = emg_features(s.emg, cfg.emg_rate_hz);
    const auto result = baum_welch_train(frames, frame_labels(frames, s.emg_labels, cfg.emg_rate_hz));
    for (std::size_t i = 1; i < result.log_likelihoods.size(); ++i)
      monotone = monotone && result.log_likelihoods[i] >= result.log_likelihoods[i - 1] - 1e-9;
    ++runs;
  }
  SynthConfig cfg;
  const auto train = synth_session(41, training_protocol(12.0), {}, cfg);
  const auto train_frames = emg_features(train.emg, cfg.emg_rate_hz);
  const auto model = baum_welch_train(train_frames, frame_labels(train_frames, train.emg_labels, cfg.emg_rate_hz)).model;
  const std::vector<ScriptSegment> live_script{{Gesture::normal, 4.0},  {Gesture::fist, 3.0},    {Gesture::normal, 3.0},
                                               {Gesture::spread, 3.0},  {Gesture::wave_up, 3.0}, {Gesture::normal, 2.0},
                                               {Gesture::wave_down, 3.0}, {Gesture::fist, 2.0},  {Gesture::normal, 4.0}};
  const auto live = synth_session(42, live_script, {}, cfg);
  const auto frames = emg_features(live.emg, cfg.emg_rate_hz);
  const auto truth = frame_labels(frames, live.emg_labels, cfg.emg_rate_hz);
  const auto decoded = forward_decode(model, frames);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < decoded.frames.size(); ++i) hits += decoded.frames[i].gesture == truth[i] ? 1 : 0;
  const double accuracy = static_cast<double>(hits) / static_cast<double>(decoded.frames.size());
  return {monotone && accuracy >= 0.9,
          fmt("log-likelihood monotone on %d/%d runs, decode accuracy %.3f", monotone ? runs : 0, runs, accuracy)};
}

Outcome kalman() {
  using namespace hsi::decoder;
  KalmanState s;
  s.eta = 0.02;
  s.covariance.setZero();
  s.mean << 0.5, -1.0, 0.3, 0.2;
  const Point2 accel(0.4, -0.1);
  bool exact = true;
  for (int k = 1; k <= 500; ++k) {
    s = kalman_step(s, accel, std::nullopt, {});
    const double t = 0.02 * k;
    // Discrete double integrator: position gains eta^2 (k^2 / 2) a.
    const Point2 p = Point2(0.5, -1.0) + t * Point2(0.3, 0.2) + 0.5 * t * t * accel;
    const Point2 v = Point2(0.3, 0.2) + t * accel;
    exact = exact && (s.position() - p).norm() < 1e-12 && (s.velocity() - v).norm() < 1e-12;
  }
  KalmanNoise noise;
  noise.process = Eigen::Vector4d(1e-3, 2e-3, 5e-3, 1e-2).asDiagonal();
  noise.measurement = Eigen::Vector4d(0.05, 0.04, 0.2, 0.3).asDiagonal();
  KalmanState f;
  f.eta = 0.02;
  for (int k = 0; k < 5000; ++k) f = kalman_step(f, Point2::Zero(), Eigen::Vector4d::Zero(), noise);
  const double diff =
      (f.covariance - oracle::steady_state_filtered_covariance(transition_matrix(0.02), noise.process, noise.measurement))
          .cwiseAbs()
          .maxCoeff();
  return {exact && diff <= 1e-6, fmt("noise-free trajectory exact %d, steady-state covariance difference %.2e", exact, diff)};
}

Outcome determinism() {
  const auto s = harness::load_scenario(g_scenarios / "paper_fig7.json");
  std::ostringstream a, b;
  harness::write_trace(harness::run_episode(s), s, a);
  harness::write_trace(harness::run_episode(s), s, b);
  return {a.str() == b.str() && !a.str().empty(), fmt("two traces of %zu bytes, identical %d", a.str().size(), a.str() == b.str())};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string scenarios = "scenarios";
  std::vector<int> only;
  app.add_option("--scenarios", scenarios, "Scenario directory")->capture_default_str();
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  g_scenarios = scenarios;

  const std::vector<Criterion> criteria{
      {1, "fixed point of the dense system", 5, fixed_point},
      {2, "agent sweep equals dense step", 5, distributed_equals_dense},
      {3, "certified gain converges", 60, gain_sufficiency},
      {4, "larger radius converges no slower", 120, radius_trend},
      {5, "centroid estimator", 10, centroid_estimator},
      {6, "LQR gains match DP oracle", 5, lqr_oracle},
      {7, "50-agent morph scenario", 120, morph_scenario},
      {8, "HMM training and decoding", 30, hmm},
      {9, "Kalman pointer filter", 5, kalman},
      {10, "deterministic episode traces", 120, determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto started = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = out.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s %2d %s: %s [%.2fs, limit %.0fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), secs,
                c.limit_s, in_time ? "" : ", too slow");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
