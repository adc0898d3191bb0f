#include "hsi/controller.hpp"

#include <cmath>
#include <sstream>

namespace hsi::controller {

void validate(const ControllerGains& gains) {
  if (!(gains.alpha > 0.0 && gains.alpha < 1.0)) throw InvalidInput("alpha must lie in (0, 1)");
  if (!(gains.kp > 0.0 && gains.kp < 1.0)) throw InvalidInput("kp must lie in (0, 1)");
}

SwarmState SwarmState::at_rest(const Matrix2Xr& positions) {
  SwarmState s;
  s.p = positions;
  s.v = Matrix2Xr::Zero(positions.rows(), 2);
  s.c_hat = positions;
  s.q = positions;
  return s;
}

StabilityCertificate stability_gain_bound(const netgraph::SpectralSummary& spectra, double alpha,
                                          double kp_candidate) {
  StabilityCertificate cert;
  cert.kp_candidate = kp_candidate;
  cert.delta1 = 1.0 - std::pow(1.0 - alpha * spectra.lambda2_normalized, 2);
  cert.delta2 = 1.0 - std::pow(1.0 - spectra.lambda2_weighted, 2);
  cert.delta3 = 1.0;

  Eigen::Matrix3d& s = cert.s_matrix;
  s << cert.delta1, -kp_candidate, 0.0,
       -1.0, cert.delta2, -1.0,
       -1.0, 0.0, 1.0;
  cert.leading_minors = {s(0, 0), s.topLeftCorner<2, 2>().determinant(), s.determinant()};

  const bool connected = spectra.connected && spectra.lambda2_normalized > netgraph::kConnectivityTolerance &&
                         spectra.lambda2_weighted > netgraph::kConnectivityTolerance;
  if (!connected) {
    cert.kp_max = 0.0;
    cert.is_m_matrix = false;
    return cert;
  }
  cert.kp_max = 0.5 * cert.delta1 * cert.delta2;

  bool off_diagonal_ok = true;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j && s(i, j) > 0.0) off_diagonal_ok = false;
  cert.is_m_matrix = off_diagonal_ok && cert.leading_minors[0] > 0.0 && cert.leading_minors[1] > 0.0 &&
                     cert.leading_minors[2] > 0.0;
  return cert;
}

DenseSystem assemble_system(const netgraph::CommGraph& graph, const ControllerGains& gains, const PlanStep& step) {
  const int m = graph.size();
  if (step.z.rows() != m) throw InvalidInput("formation size does not match graph size");
  if (m > 1 && !netgraph::spectral_summary(graph).connected)
    throw InvalidInput("dense system requires a connected communication graph");

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);  // D^-1 L
  for (int i = 0; i < m; ++i)
    if (graph.degrees(i) > 0) k.row(i) = graph.laplacian.row(i) / static_cast<double>(graph.degrees(i));
  const Eigen::MatrixXd& w = graph.weights;
  const double alpha = gains.alpha, kp = gains.kp;

  DenseSystem sys;
  sys.a = Eigen::MatrixXd::Zero(4 * m, 4 * m);
  sys.a.block(0, 0, m, m) = eye;
  sys.a.block(0, m, m, m) = eye;
  sys.a.block(m, 0, m, m) = -alpha * k - kp * eye;
  sys.a.block(m, m, m, m) = -alpha * k;
  sys.a.block(m, 2 * m, m, m) = -kp * w;
  sys.a.block(m, 3 * m, m, m) = kp * eye;
  sys.a.block(2 * m, 0, m, m) = eye;
  sys.a.block(2 * m, 2 * m, m, m) = w;
  sys.a.block(2 * m, 3 * m, m, m) = -eye;
  sys.a.block(3 * m, 0, m, m) = eye;

  const Eigen::MatrixXd z_rot = step.z * rotation(step.rotation).transpose();
  const Eigen::MatrixXd ones_c = Eigen::VectorXd::Ones(m) * step.centroid.transpose();
  sys.f = Eigen::MatrixXd::Zero(4 * m, 2);
  sys.f.block(m, 0, m, 2) = step.scale * alpha * k * z_rot + kp * ones_c;

  const Eigen::MatrixXd zd = ones_c + step.scale * z_rot;
  sys.x_desired = Eigen::MatrixXd::Zero(4 * m, 2);
  sys.x_desired.block(0, 0, m, 2) = zd;
  sys.x_desired.block(2 * m, 0, m, 2) = ones_c;
  sys.x_desired.block(3 * m, 0, m, 2) = zd;
  return sys;
}

Eigen::MatrixXd stack(const SwarmState& s) {
  const Eigen::Index m = s.p.rows();
  Eigen::MatrixXd x(4 * m, 2);
  x << s.p, s.v, s.c_hat, s.q;
  return x;
}

SwarmState unstack(const Eigen::MatrixXd& x) {
  const Eigen::Index m = x.rows() / 4;
  SwarmState s;
  s.p = x.middleRows(0, m);
  s.v = x.middleRows(m, m);
  s.c_hat = x.middleRows(2 * m, m);
  s.q = x.middleRows(3 * m, m);
  return s;
}

AgentState agent_step(const AgentState& self, std::span<const NeighborMessage> neighbors, const Point2& z_rotated,
                      const PlanStep& step, const ControllerGains& gains) {
  Point2 consensus = Point2::Zero();
  Point2 avg_pv = Point2::Zero();
  Point2 avg_z = Point2::Zero();
  for (const auto& n : neighbors) {
    consensus += n.weight * (n.c_hat - self.c_hat);
    avg_pv += n.p_plus_v;
    avg_z += n.z_rotated;
  }

  AgentState next;
  next.c_hat = self.c_hat + consensus + self.p - self.q;
  Point2 v = -gains.kp * (next.c_hat - step.centroid);
  if (!neighbors.empty()) {
    const double inv_d = 1.0 / static_cast<double>(neighbors.size());
    v += -gains.alpha * ((self.p + self.v) - inv_d * avg_pv);
    v += step.scale * gains.alpha * (z_rotated - inv_d * avg_z);
  }
  next.v = v;
  next.p = self.p + self.v;
  next.q = self.p;
  return next;
}

Matrix2Xr centroid_estimate_step(const Matrix2Xr& c_hat, const Matrix2Xr& p, const Matrix2Xr& q,
                                 const Eigen::MatrixXd& weights) {
  if (weights.rows() != c_hat.rows() || weights.cols() != c_hat.rows() || p.rows() != c_hat.rows() ||
      q.rows() != c_hat.rows())
    throw InvalidInput("centroid estimator sizes differ");
  return weights * c_hat + p - q;
}

SwarmState step_swarm(const SwarmState& state, const netgraph::CommGraph& graph, const PlanStep& step,
                      const ControllerGains& gains) {
  const int m = state.size();
  if (graph.size() != m || step.z.rows() != m) throw InvalidInput("state, graph and formation sizes differ");
  const Eigen::Matrix2d rot = rotation(step.rotation);

  SwarmState next = state;
  std::vector<NeighborMessage> inbox;
  for (int i = 0; i < m; ++i) {
    inbox.clear();
    for (int j = 0; j < m; ++j) {
      if (graph.adjacency(i, j) == 0) continue;
      inbox.push_back({state.p.row(j).transpose() + state.v.row(j).transpose(), state.c_hat.row(j).transpose(),
                       rot * step.z.row(j).transpose(), graph.weights(i, j)});
    }
    const AgentState self{state.p.row(i).transpose(), state.v.row(i).transpose(), state.c_hat.row(i).transpose(),
                          state.q.row(i).transpose()};
    const AgentState out = agent_step(self, inbox, rot * step.z.row(i).transpose(), step, gains);
    next.p.row(i) = out.p.transpose();
    next.v.row(i) = out.v.transpose();
    next.c_hat.row(i) = out.c_hat.transpose();
    next.q.row(i) = out.q.transpose();
  }
  return next;
}

TrackingErrors errors(const SwarmState& state, const PlanStep& step) {
  const Eigen::RowVector2d mean = state.p.colwise().mean();
  Matrix2Xr centred = state.p;
  centred.rowwise() -= mean;
  const Matrix2Xr shape = step.scale * step.z * rotation(step.rotation).transpose();
  return {(centred - shape).norm(), (mean.transpose() - step.centroid).norm()};
}

std::pair<SwarmState, SegmentTrace> run_segment_on_graph(SwarmState state, const netgraph::CommGraph& graph,
                                                         const PlanStep& step, const ControllerGains& gains,
                                                         const SegmentLimits& limits, const StepObserver& observer) {
  SegmentTrace trace;
  TrackingErrors e = errors(state, step);
  trace.records.push_back({0, e.formation, e.centroid});
  if (observer && !observer(0, state, e)) {
    trace.cancelled = true;
    return {std::move(state), std::move(trace)};
  }

  int t = 0;
  while (!(e.formation <= limits.tol_f && e.centroid <= limits.tol_c) && t < limits.max_steps) {
    state = step_swarm(state, graph, step, gains);
    ++t;
    e = errors(state, step);
    trace.records.push_back({t, e.formation, e.centroid});
    if (observer && !observer(t, state, e)) {
      trace.cancelled = true;
      break;
    }
  }
  trace.steps_used = t;
  trace.converged = e.formation <= limits.tol_f && e.centroid <= limits.tol_c;
  return {std::move(state), std::move(trace)};
}

std::pair<SwarmState, SegmentTrace> run_segment(SwarmState state, const PlanStep& step, const ControllerGains& gains,
                                                std::span<const double> radii, const SegmentLimits& limits,
                                                const StepObserver& observer) {
  if (step.mode < 1 || step.mode > static_cast<int>(radii.size()))
    throw InvalidInput("plan step mode " + std::to_string(step.mode) + " outside radius table");
  const auto graph = netgraph::build_nu_disk_graph(state.p, radii[step.mode - 1]);
  std::vector<std::string> warnings;
  if (graph.size() > 1) {
    const auto spectra = netgraph::spectral_summary(graph);
    if (!spectra.connected) {
      std::ostringstream os;
      os << "communication graph with radius " << graph.radius << " is disconnected; running best effort";
      warnings.push_back(os.str());
    } else {
      const auto cert = stability_gain_bound(spectra, gains.alpha, gains.kp);
      if (!cert.is_m_matrix) {
        std::ostringstream os;
        os << "kp = " << gains.kp << " exceeds the stability bound " << cert.kp_max << " for this graph";
        warnings.push_back(os.str());
      }
    }
  }
  auto result = run_segment_on_graph(std::move(state), graph, step, gains, limits, observer);
  result.second.warnings.insert(result.second.warnings.begin(), warnings.begin(), warnings.end());
  return result;
}

}  // namespace hsi::controller
