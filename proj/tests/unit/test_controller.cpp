#include "hsi/controller.hpp"
#include "hsi/geom.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <random>

using namespace hsi;
using namespace hsi::controller;

namespace {

Matrix2Xr random_matrix(std::mt19937_64& rng, int m, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix2Xr x(m, 2);
  for (int i = 0; i < m; ++i) x.row(i) << n(rng), n(rng);
  return x;
}

PlanStep random_step(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> u(-3, 3);
  PlanStep step;
  step.z = random_matrix(rng, m, 1.0);
  step.z.rowwise() -= step.z.colwise().mean();
  step.scale = 0.5 + std::abs(u(rng));
  step.rotation = u(rng);
  step.centroid = Point2(u(rng), u(rng));
  return step;
}

SwarmState random_state(std::mt19937_64& rng, int m) {
  return {random_matrix(rng, m, 3.0), random_matrix(rng, m, 0.5), random_matrix(rng, m, 3.0),
          random_matrix(rng, m, 3.0)};
}

netgraph::CommGraph two_node_graph() {
  Eigen::MatrixXi a(2, 2);
  a << 0, 1, 1, 0;
  return netgraph::graph_from_adjacency(a);
}

}  // namespace

TEST(Gains, Validation) {
  EXPECT_NO_THROW(validate(ControllerGains{}));
  EXPECT_THROW(validate({0.0, 0.03}), InvalidInput);
  EXPECT_THROW(validate({0.15, 1.0}), InvalidInput);
  EXPECT_THROW(validate({0.15, -0.1}), InvalidInput);
}

TEST(GainBound, TwoNodeNumbers) {
  const auto cert = stability_gain_bound(netgraph::spectral_summary(two_node_graph()), 0.15, 0.03);
  EXPECT_NEAR(cert.delta1, 0.51, 1e-15);
  EXPECT_NEAR(cert.delta2, 1.0, 1e-15);
  EXPECT_NEAR(cert.kp_max, 0.255, 1e-15);
  EXPECT_TRUE(cert.is_m_matrix);
}

TEST(GainBound, ZeroGainDecouples) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = netgraph::build_nu_disk_graph(oracle::random_connected_positions(rng, 8, 3.0, 6.0), 3.0);
    const auto cert = stability_gain_bound(netgraph::spectral_summary(g), 0.15, 0.0);
    EXPECT_GT(cert.leading_minors[0], 0.0);
    EXPECT_GT(cert.leading_minors[1], 0.0);
    EXPECT_GT(cert.leading_minors[2], 0.0);
    EXPECT_TRUE(cert.is_m_matrix);
  }
}

TEST(GainBound, CertificateFlipsAtTheBound) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = netgraph::build_nu_disk_graph(oracle::random_connected_positions(rng, 8, 3.0, 6.0), 3.0);
    const auto sp = netgraph::spectral_summary(g);
    const double bound = stability_gain_bound(sp, 0.15, 0.0).kp_max;
    EXPECT_TRUE(stability_gain_bound(sp, 0.15, 0.9 * bound).is_m_matrix);
    EXPECT_FALSE(stability_gain_bound(sp, 0.15, 1.1 * bound).is_m_matrix);
    // det S = delta1 delta2 - 2 kp
    const auto c = stability_gain_bound(sp, 0.15, 0.3 * bound);
    EXPECT_NEAR(c.leading_minors[2], c.delta1 * c.delta2 - 2 * 0.3 * bound, 1e-12);
  }
}

TEST(GainBound, DefaultGainsOnWellConnectedSwarm) {
  // A dense 50-agent swarm gives delta1 delta2 / 2 well above 0.03.
  const auto z = geom::fill_polygon_uniform(geom::Polygon({{0, 0}, {4, 0}, {4, 4}, {0, 4}}), 50).z;
  const auto sp = netgraph::spectral_summary(netgraph::build_nu_disk_graph(z, 150.0));
  const auto cert = stability_gain_bound(sp, 0.15, 0.03);
  EXPECT_GT(cert.kp_max, 0.03);
  EXPECT_TRUE(cert.is_m_matrix);
}

TEST(GainBound, DisconnectedHasNoCertificate) {
  const auto sp = netgraph::spectral_summary(netgraph::graph_from_adjacency(Eigen::MatrixXi::Zero(3, 3)));
  const auto cert = stability_gain_bound(sp, 0.15, 0.0);
  EXPECT_EQ(cert.kp_max, 0.0);
  EXPECT_FALSE(cert.is_m_matrix);
}

TEST(Dense, StackRoundTrip) {
  std::mt19937_64 rng(3);
  const auto s = random_state(rng, 6);
  const auto back = unstack(stack(s));
  EXPECT_EQ(back.p, s.p);
  EXPECT_EQ(back.v, s.v);
  EXPECT_EQ(back.c_hat, s.c_hat);
  EXPECT_EQ(back.q, s.q);
}

TEST(Dense, DesiredStateIsAFixedPoint) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(3, 12);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = size(rng);
    const auto g = netgraph::build_nu_disk_graph(oracle::random_connected_positions(rng, m, 3.0, 6.0), 3.0);
    const auto sys = assemble_system(g, {}, random_step(rng, m));
    EXPECT_LE((sys.a * sys.x_desired + sys.f - sys.x_desired).norm(), 1e-9);
  }
}

TEST(Dense, OriginIsFixedForZeroGoal) {
  std::mt19937_64 rng(5);
  const int m = 5;
  const auto g = netgraph::build_nu_disk_graph(oracle::random_connected_positions(rng, m, 3.0, 6.0), 3.0);
  PlanStep step;
  step.z = Matrix2Xr::Zero(m, 2);
  const auto sys = assemble_system(g, {}, step);
  EXPECT_TRUE(sys.f.middleRows(m, m).isZero());
  EXPECT_TRUE(sys.x_desired.isZero());
  EXPECT_TRUE((sys.a * Eigen::MatrixXd::Zero(4 * m, 2) + sys.f).isZero());
}

TEST(Dense, RejectsDisconnectedGraph) {
  PlanStep step;
  step.z = Matrix2Xr::Zero(3, 2);
  EXPECT_THROW(assemble_system(netgraph::graph_from_adjacency(Eigen::MatrixXi::Zero(3, 3)), {}, step), InvalidInput);
}

TEST(Distributed, MatchesDenseStep) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 5;
    const auto g = netgraph::build_nu_disk_graph(oracle::random_connected_positions(rng, m, 3.0, 6.0), 3.0);
    const auto step = random_step(rng, m);
    const auto state = random_state(rng, m);
    const auto sys = assemble_system(g, {}, step);
    const Eigen::MatrixXd dense = sys.a * stack(state) + sys.f;
    const Eigen::MatrixXd distributed = stack(step_swarm(state, g, step, {}));
    EXPECT_LE((dense - distributed).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Distributed, AgentsAtGoalStayPut) {
  std::mt19937_64 rng(7);
  const int m = 8;
  const auto g = netgraph::build_nu_disk_graph(oracle::random_connected_positions(rng, m, 3.0, 6.0), 3.0);
  const auto step = random_step(rng, m);
  SwarmState s = SwarmState::at_rest(step.placement());
  s.c_hat.rowwise() = step.centroid.transpose();
  const auto next = step_swarm(s, g, step, {});
  EXPECT_LT((next.p - s.p).norm(), 1e-12);
  EXPECT_LT(next.v.norm(), 1e-12);
  EXPECT_LT((next.c_hat - s.c_hat).norm(), 1e-12);
}

TEST(Distributed, IsolatedAgentAtCentroidHasZeroVelocity) {
  PlanStep step;
  step.z = Matrix2Xr::Zero(1, 2);
  step.centroid = Point2(2, -1);
  const AgentState self{step.centroid, Point2::Zero(), step.centroid, step.centroid};
  const auto next = agent_step(self, {}, Point2::Zero(), step, {});
  EXPECT_EQ(next.v, Point2::Zero());
  EXPECT_EQ(next.p, step.centroid);
}

TEST(Errors, AtGoalAndTranslated) {
  std::mt19937_64 rng(8);
  const auto step = random_step(rng, 6);
  const auto at_goal = errors(SwarmState::at_rest(step.placement()), step);
  EXPECT_LT(at_goal.formation, 1e-12);
  EXPECT_LT(at_goal.centroid, 1e-12);
  Matrix2Xr shifted = step.placement();
  shifted.col(0).array() += 1.0;
  const auto e = errors(SwarmState::at_rest(shifted), step);
  EXPECT_LT(e.formation, 1e-12);
  EXPECT_NEAR(e.centroid, 1.0, 1e-12);
}

TEST(Errors, MatchLoopRecomputation) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 7;
    const auto step = random_step(rng, m);
    const auto s = random_state(rng, m);
    double mx = 0, my = 0;
    for (int i = 0; i < m; ++i) {
      mx += s.p(i, 0) / m;
      my += s.p(i, 1) / m;
    }
    const double c = std::cos(step.rotation), sn = std::sin(step.rotation);
    double ef2 = 0;
    for (int i = 0; i < m; ++i) {
      const double gx = step.scale * (c * step.z(i, 0) - sn * step.z(i, 1));
      const double gy = step.scale * (sn * step.z(i, 0) + c * step.z(i, 1));
      ef2 += std::pow(s.p(i, 0) - mx - gx, 2) + std::pow(s.p(i, 1) - my - gy, 2);
    }
    const auto e = errors(s, step);
    EXPECT_NEAR(e.formation, std::sqrt(ef2), 1e-12);
    EXPECT_NEAR(e.centroid, std::hypot(mx - step.centroid.x(), my - step.centroid.y()), 1e-12);
  }
}

TEST(Segment, StartingAtGoalTakesZeroSteps) {
  std::mt19937_64 rng(10);
  const auto step = random_step(rng, 6);
  const std::array<double, 1> radii{100.0};
  const auto [state, trace] = run_segment(SwarmState::at_rest(step.placement()), step, {}, radii, {});
  EXPECT_EQ(trace.steps_used, 0);
  EXPECT_TRUE(trace.converged);
  EXPECT_LT(trace.records.front().e_f, 1e-12);
  EXPECT_LT(trace.records.front().e_c, 1e-12);
}

TEST(Segment, ConvergesUnderCertifiedGain) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const int m = 10;
    const auto start = oracle::random_connected_positions(rng, m, 4.0, 6.0);
    const auto g = netgraph::build_nu_disk_graph(start, 4.0);
    const double bound = stability_gain_bound(netgraph::spectral_summary(g), 0.15, 0.0).kp_max;
    auto step = random_step(rng, m);
    const auto [state, trace] =
        run_segment_on_graph(SwarmState::at_rest(start), g, step, {0.15, 0.9 * bound}, {5000, 1e-6, 1e-6});
    EXPECT_TRUE(trace.converged) << "trial " << trial;
  }
}

TEST(Segment, SparseGraphStillContracts) {
  // Slow but stable: every mode except the conserved one lies inside the unit circle.
  std::mt19937_64 rng(15);
  const int m = 10;
  const auto g = netgraph::build_nu_disk_graph(oracle::random_connected_positions(rng, m, 3.0, 6.0), 3.0);
  const double bound = stability_gain_bound(netgraph::spectral_summary(g), 0.15, 0.0).kp_max;
  PlanStep step;
  step.z = Matrix2Xr::Zero(m, 2);
  const auto sys = assemble_system(g, {0.15, 0.9 * bound}, step);
  Eigen::VectorXd mags = Eigen::EigenSolver<Eigen::MatrixXd>(sys.a).eigenvalues().cwiseAbs();
  std::sort(mags.data(), mags.data() + mags.size(), std::greater<>());
  EXPECT_NEAR(mags(0), 1.0, 1e-9);
  EXPECT_LT(mags(1), 1.0 - 1e-4);
}

TEST(Segment, DisconnectedGraphWarns) {
  Matrix2Xr p(3, 2);
  p << 0, 0, 10, 0, 20, 0;
  PlanStep step;
  step.z = Matrix2Xr::Zero(3, 2);
  const std::array<double, 1> radii{1.0};
  const auto [state, trace] = run_segment(SwarmState::at_rest(p), step, {}, radii, {20, 1e-3, 1e-3});
  EXPECT_FALSE(trace.warnings.empty());
  EXPECT_FALSE(trace.converged);
  EXPECT_EQ(trace.steps_used, 20);
}

TEST(Segment, ObserverCanCancel) {
  std::mt19937_64 rng(12);
  const auto start = oracle::random_connected_positions(rng, 6, 3.0, 5.0);
  const auto step = random_step(rng, 6);
  const std::array<double, 1> radii{3.0};
  int calls = 0;
  const auto [state, trace] = run_segment(SwarmState::at_rest(start), step, {}, radii, {},
                                          [&](int t, const SwarmState&, const TrackingErrors&) {
                                            ++calls;
                                            return t < 5;
                                          });
  EXPECT_TRUE(trace.cancelled);
  EXPECT_EQ(trace.steps_used, 5);
  EXPECT_EQ(calls, 6);
}

TEST(CentroidEstimator, ConservesTheDelayedMean) {
  std::mt19937_64 rng(13);
  const int m = 9;
  const auto start = oracle::random_connected_positions(rng, m, 3.0, 6.0);
  const auto g = netgraph::build_nu_disk_graph(start, 3.0);
  const auto step = random_step(rng, m);
  SwarmState s = SwarmState::at_rest(start);
  for (int t = 0; t < 200; ++t) {
    const Eigen::RowVector2d previous_mean = s.p.colwise().mean();
    s = step_swarm(s, g, step, {});
    EXPECT_LT((s.c_hat.colwise().mean() - previous_mean).norm(), 1e-12);
  }
}

TEST(CentroidEstimator, FrozenSwarmReachesTrueCentroid) {
  std::mt19937_64 rng(14);
  const int m = 12;
  const auto p = oracle::random_connected_positions(rng, m, 3.0, 8.0);
  const auto w = netgraph::build_nu_disk_graph(p, 3.0).weights;
  Matrix2Xr c_hat = p;
  for (int t = 0; t < 5000; ++t) c_hat = centroid_estimate_step(c_hat, p, p, w);
  const Eigen::RowVector2d centroid = p.colwise().mean();
  for (int i = 0; i < m; ++i) EXPECT_LT((c_hat.row(i) - centroid).norm(), 1e-6);
}
