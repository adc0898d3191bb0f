#include "hsi/controller.hpp"
#include "hsi/decoder.hpp"
#include "hsi/geom.hpp"
#include "hsi/netgraph.hpp"
#include "hsi/planner.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace hsi;

namespace {

Matrix2Xr formation(int m) {
  return geom::fill_polygon_uniform(geom::Polygon({{0, 0}, {10, 0}, {10, 10}, {0, 10}}), m).z;
}

}  // namespace

static void BM_BuildGraph(benchmark::State& state) {
  const auto p = formation(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(netgraph::build_nu_disk_graph(p, 3.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildGraph)->RangeMultiplier(2)->Range(16, 256)->Complexity();

static void BM_SpectralSummary(benchmark::State& state) {
  const auto g = netgraph::build_nu_disk_graph(formation(static_cast<int>(state.range(0))), 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(netgraph::spectral_summary(g));
}
BENCHMARK(BM_SpectralSummary)->RangeMultiplier(2)->Range(16, 128);

static void BM_StepSwarm(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const auto z = formation(m);
  const auto g = netgraph::build_nu_disk_graph(z, 3.0);
  controller::PlanStep step;
  step.z = z;
  step.z.rowwise() -= step.z.colwise().mean();
  step.centroid = Point2(5, 5);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 0.5);
  Matrix2Xr start = z;
  for (int i = 0; i < m; ++i) start.row(i) += Eigen::RowVector2d(n(rng), n(rng));
  auto s = controller::SwarmState::at_rest(start);
  for (auto _ : state) {
    s = controller::step_swarm(s, g, step, {});
    benchmark::DoNotOptimize(s.p.data());
  }
  state.SetItemsProcessed(state.iterations() * m);
}
BENCHMARK(BM_StepSwarm)->RangeMultiplier(2)->Range(16, 256);

static void BM_Plan(benchmark::State& state) {
  const auto current = planner::hid_from_intention(
      geom::make_intention(geom::Polygon({{-2, -1.5}, {2, -1.5}, {0, 2}}), 2.0, 0.0, Point2::Zero()));
  const auto goal = geom::make_intention(geom::Polygon({{-2.8, -2.8}, {2.8, -2.8}, {3.5, 2.8}, {-2.1, 3.5}}), 11.6,
                                         0.87, Point2(60, 40));
  planner::PlannerConfig cfg;
  cfg.agents = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(planner::plan(current, goal, cfg));
}
BENCHMARK(BM_Plan)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

static void BM_ForwardDecode(benchmark::State& state) {
  using namespace hsi::decoder;
  const auto train = synth_session(1, training_protocol(6.0));
  const auto frames = emg_features(train.emg, 200.0);
  const auto model = baum_welch_train(frames, frame_labels(frames, train.emg_labels, 200.0)).model;
  for (auto _ : state) benchmark::DoNotOptimize(forward_decode(model, frames));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
}
BENCHMARK(BM_ForwardDecode)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
