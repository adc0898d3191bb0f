#include "hsi/controller.hpp"
#include "hsi/harness/episode.hpp"
#include "hsi/harness/scenario.hpp"
#include "hsi/harness/server.hpp"
#include "hsi/json_io.hpp"
#include "hsi/netgraph.hpp"
#include "hsi/planner.hpp"
#include "hsi/recording.hpp"

#include <CLI11.hpp>

#include <pthread.h>
#include <signal.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>

namespace {

using namespace hsi;

constexpr double kDeg = 180.0 / std::numbers::pi;

void print_plan(const harness::Scenario& sc, const planner::Plan& plan) {
  std::printf("scenario %s: M=%d, N=%d, hid cost %.6g, total %.6g\n", sc.name.c_str(), sc.agents,
              static_cast<int>(plan.steps.size()), plan.hid_cost, plan.total_cost);
  std::printf("%4s %10s %10s %21s %4s", "l", "scale", "theta_deg", "centroid", "mode");
  for (std::size_t k = 0; k < sc.planner.mode_radii.size(); ++k)
    std::printf("  J(nu=%-5g)", sc.planner.mode_radii[k]);
  std::printf("\n");
  for (std::size_t l = 0; l < plan.steps.size(); ++l) {
    const auto& s = plan.steps[l];
    std::printf("%4zu %10.4f %10.3f   (%8.3f, %8.3f) %4d", l + 1, s.scale, s.rotation * kDeg, s.centroid.x(),
                s.centroid.y(), s.mode);
    for (Eigen::Index k = 0; k < plan.mode_costs.cols(); ++k) {
      const double c = plan.mode_costs(static_cast<Eigen::Index>(l), k);
      if (std::isfinite(c))
        std::printf("  %11.5g", c);
      else
        std::printf("  %11s", "infeasible");
    }
    std::printf("\n");
  }
}

int cmd_plan(const std::string& path, const std::string& json_out) {
  const auto sc = harness::load_scenario(path);
  const auto current = planner::hid_from_intention(sc.current);
  const auto plan = planner::plan(current, sc.goal, sc.planner);
  print_plan(sc, plan);
  if (!json_out.empty()) {
    std::ofstream out(json_out);
    out << json_io::to_json(plan).dump(2) << '\n';
  }
  return 0;
}

int cmd_run(const std::string& path, const std::string& trace_path) {
  const auto sc = harness::load_scenario(path);
  const auto trace = harness::run_episode(sc);
  std::printf("scenario %s: %zu segments, %.2f s\n", sc.name.c_str(), trace.segments.size(), trace.wall_seconds);
  std::printf("%4s %4s %7s %6s %12s %12s %9s\n", "l", "mode", "radius", "steps", "e_f", "e_c", "converged");
  for (const auto& seg : trace.segments) {
    const auto& last = seg.trace.records.back();
    std::printf("%4d %4d %7g %6d %12.4e %12.4e %9s\n", seg.segment, seg.mode, seg.radius, seg.trace.steps_used,
                last.e_f, last.e_c, seg.trace.converged ? "yes" : "no");
    for (const auto& w : seg.trace.warnings) std::printf("     warning: %s\n", w.c_str());
  }
  std::printf("episode %s\n", trace.converged ? "converged" : "did not converge");
  if (!trace_path.empty()) {
    std::ofstream out(trace_path);
    if (!out) throw std::runtime_error("cannot write " + trace_path);
    harness::write_trace(trace, sc, out);
  }
  return trace.converged ? 0 : 2;
}

void print_spectra(const char* label, const Matrix2Xr& positions, const harness::Scenario& sc) {
  std::printf("%s\n", label);
  std::printf("  %7s %6s %12s %12s %12s %10s %12s %5s\n", "radius", "edges", "lambda2", "lambda2_N", "lambda2_W",
              "kp_max", "J_con+J_com", "cert");
  for (double radius : sc.planner.mode_radii) {
    const auto g = netgraph::build_nu_disk_graph(positions, radius);
    const auto sp = netgraph::spectral_summary(g);
    const auto cert = controller::stability_gain_bound(sp, sc.gains.alpha, sc.gains.kp);
    const auto jc = netgraph::connectivity_cost(g, sc.planner.kappa1, sc.planner.kappa2);
    const auto jm = netgraph::communication_cost(g, sc.planner.kappa3);
    std::printf("  %7g %6d %12.6g %12.6g %12.6g %10.4g ", radius, g.edge_count(), sp.lambda2, sp.lambda2_normalized,
                sp.lambda2_weighted, cert.kp_max);
    if (jc && jm)
      std::printf("%12.6g", *jc + *jm);
    else
      std::printf("%12s", "infeasible");
    std::printf(" %5s\n", cert.is_m_matrix ? "ok" : "no");
  }
}

int cmd_spectra(const std::string& path) {
  const auto sc = harness::load_scenario(path);
  std::printf("scenario %s: alpha=%g kp=%g\n", sc.name.c_str(), sc.gains.alpha, sc.gains.kp);
  print_spectra("initial configuration", sc.initial_state().p, sc);
  const auto goal = geom::intention_to_goal(sc.goal, sc.agents);
  print_spectra("goal formation", place_formation(goal.formation.z, goal.scale, goal.rotation, goal.centroid), sc);
  return 0;
}

int cmd_decode(const std::string& path, int min_hold) {
  const auto rec = decoder::load_recording(path);
  decoder::EventOptions ev;
  ev.min_hold_frames = min_hold;
  const auto rep = decoder::decode_recording(rec, decoder::default_pointer_noise(), {}, ev);
  std::printf("training: %d iterations, final log-likelihood %.6g\n", rep.training.iterations,
              rep.training.log_likelihoods.empty() ? 0.0 : rep.training.log_likelihoods.back());
  for (const auto& w : rep.training.warnings) std::printf("  warning: %s\n", w.c_str());
  for (const auto& w : rep.decoded.warnings) std::printf("  warning: %s\n", w.c_str());
  std::printf("decoded %zu frames", rep.decoded.frames.size());
  if (rep.accuracy) std::printf(", accuracy %.2f%%", 100.0 * *rep.accuracy);
  std::printf("\n");
  for (const auto& e : rep.events) {
    if (e.kind == decoder::EventKind::move || e.kind == decoder::EventKind::none) continue;
    std::printf("  %8.2f s  %-11s at (%.3f, %.3f)\n", e.time, std::string(decoder::to_string(e.kind)).c_str(),
                e.position.x(), e.position.y());
  }
  if (!rep.pointer.empty()) {
    const auto& p = rep.pointer.back();
    std::printf("final pointer (%.4f, %.4f)\n", p.mean(0), p.mean(1));
  }
  return 0;
}

int cmd_synth(const std::string& out_path, std::uint64_t seed, double seconds) {
  using decoder::Gesture;
  std::vector<decoder::ScriptSegment> script;
  const Gesture order[] = {Gesture::normal, Gesture::fist,      Gesture::normal,   Gesture::spread,
                           Gesture::normal, Gesture::wave_up,   Gesture::wave_down, Gesture::normal};
  const double each = seconds / static_cast<double>(std::size(order));
  for (Gesture g : order) script.push_back({g, each});
  decoder::PointerScript pointer;
  pointer.accelerations = {{Point2(0.2, 0.0), seconds / 4}, {Point2(-0.2, 0.1), seconds / 4},
                           {Point2(0.0, -0.1), seconds / 2}};
  const auto rec = decoder::synth_recording(seed, script, pointer);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << decoder::to_json(rec).dump() << '\n';
  return 0;
}

int cmd_serve(const std::string& scenario_path, const std::string& addr, const std::string& static_dir,
              int update_every, int round_delay_us) {
  // Without a scenario the swarm starts as a 30-agent square of side 10.
  const harness::Scenario base =
      scenario_path.empty()
          ? harness::parse_scenario(nlohmann::json::parse(
                R"({"name": "interactive", "agents": 30,
                    "goal": {"shape": [[-1, -1], [1, -1], [1, 1], [-1, 1]], "scale": 5}})"))
          : harness::load_scenario(scenario_path);
  harness::SessionOptions opts;
  opts.update_every = update_every;
  opts.round_delay = std::chrono::microseconds(round_delay_us);
  std::optional<std::filesystem::path> dir;
  if (!static_dir.empty()) dir = static_dir;
  // SIGINT/SIGTERM are blocked in every thread and picked up by a waiter
  // that stops the server outside signal context.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  harness::Server server(base, opts, dir);
  const auto [host, port] = harness::parse_address(addr);
  server.listen(host, port);
  std::printf("listening on %s:%d\n", host.c_str(), server.port());
  std::fflush(stdout);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.run();
  pthread_kill(waiter.native_handle(), SIGTERM);  // no-op wake-up if already stopping
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-swarm interface: planning, simulation and gesture decoding"};
  app.require_subcommand(1);

  std::string scenario, trace, json_out, recording, addr = "127.0.0.1:8765", static_dir, out_path;
  int update_every = 10, round_delay_us = 0, min_hold = 3;
  std::uint64_t seed = 1;
  double seconds = 40.0;

  auto* plan = app.add_subcommand("plan", "Print the HID plan and mode schedule for a scenario");
  plan->add_option("scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--json", json_out, "Also write the plan as JSON");

  auto* run = app.add_subcommand("run", "Plan and execute a scenario");
  run->add_option("scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--trace", trace, "Write a JSON-lines trace");

  auto* spectra = app.add_subcommand("spectra", "Graph spectra and gain bounds for each mode radius");
  spectra->add_option("scenario", scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);

  auto* decode = app.add_subcommand("decode", "Train and decode a recorded armband session");
  decode->add_option("recording", recording, "Recording JSON")->required()->check(CLI::ExistingFile);
  decode->add_option("--min-hold", min_hold, "Frames a gesture must persist before it clicks")
      ->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth-session", "Write a synthetic armband recording");
  synth->add_option("out", out_path, "Output JSON")->required();
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--seconds", seconds, "Length of the live part")->check(CLI::PositiveNumber);

  auto* serve = app.add_subcommand("serve", "Run the interactive session server");
  serve->add_option("--addr", addr, "host:port to bind")->capture_default_str();
  serve->add_option("--scenario", scenario, "Scenario providing agents, gains and planner settings")
      ->check(CLI::ExistingFile);
  serve->add_option("--static", static_dir, "Directory of static files served over HTTP")
      ->check(CLI::ExistingDirectory);
  serve->add_option("--update-every", update_every, "Controller rounds between StateUpdate messages")
      ->check(CLI::PositiveNumber);
  serve->add_option("--round-delay-us", round_delay_us, "Pause after each controller round");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) return cmd_plan(scenario, json_out);
    if (*run) return cmd_run(scenario, trace);
    if (*spectra) return cmd_spectra(scenario);
    if (*decode) return cmd_decode(recording, min_hold);
    if (*synth) return cmd_synth(out_path, seed, seconds);
    if (*serve) return cmd_serve(scenario, addr, static_dir, update_every, round_delay_us);
  } catch (const hsi::harness::ScenarioError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
