#pragma once

#include "hsi/netgraph.hpp"
#include "hsi/types.hpp"

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hsi::controller {

struct ControllerGains {
  double alpha = 0.15;
  double kp = 0.03;
};

/// Throws InvalidInput unless both gains lie strictly inside (0, 1).
void validate(const ControllerGains& gains);

/// Positions p, velocities v, centroid estimates c_hat and delayed positions
/// q = p(t-1), one row per agent.
struct SwarmState {
  Matrix2Xr p;
  Matrix2Xr v;
  Matrix2Xr c_hat;
  Matrix2Xr q;

  int size() const { return static_cast<int>(p.rows()); }

  /// Standard initialisation: v = 0, c_hat = q = p.
  static SwarmState at_rest(const Matrix2Xr& positions);
};

/// One interpreter subgoal: formation z (centred), scale, centroid, rotation
/// and the 1-based communication mode.
struct PlanStep {
  Matrix2Xr z;
  double scale = 1.0;
  Point2 centroid = Point2::Zero();
  double rotation = 0.0;
  int mode = 1;

  /// c + s * R(theta) z_i for every agent.
  Matrix2Xr placement() const { return place_formation(z, scale, rotation, centroid); }
};

struct StabilityCertificate {
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 1.0;
  double kp_max = 0.0;
  double kp_candidate = 0.0;
  Eigen::Matrix3d s_matrix = Eigen::Matrix3d::Zero();
  std::array<double, 3> leading_minors{};
  bool is_m_matrix = false;
};

/// Gain bound k^p < delta1 * delta2 / 2 with delta1 = 1 - (1 - alpha l2N)^2
/// and delta2 = 1 - (1 - l2W)^2, plus the 3x3 comparison matrix
///   [[delta1, -kp, 0], [-1, delta2, -1], [-1, 0, 1]]
/// evaluated at `kp_candidate`. A disconnected graph yields bound 0 and no
/// certificate.
StabilityCertificate stability_gain_bound(const netgraph::SpectralSummary& spectra, double alpha, double kp_candidate);

/// Dense per-dimension form X(t+1) = A X(t) + F for X = [p; v; c_hat; q].
struct DenseSystem {
  Eigen::MatrixXd a;         // 4M x 4M
  Eigen::MatrixXd f;         // 4M x 2
  Eigen::MatrixXd x_desired; // 4M x 2
};

/// Throws InvalidInput when the graph is disconnected or sizes disagree.
DenseSystem assemble_system(const netgraph::CommGraph& graph, const ControllerGains& gains, const PlanStep& step);

Eigen::MatrixXd stack(const SwarmState& state);
SwarmState unstack(const Eigen::MatrixXd& x);

/// What agent i needs from one neighbour j.
struct NeighborMessage {
  Point2 p_plus_v;     // p_j + v_j
  Point2 c_hat;        // c_hat_j
  Point2 z_rotated;    // R(theta) z_j
  double weight = 0.0; // Metropolis w_ij
};

struct AgentState {
  Point2 p, v, c_hat, q;
};

/// Local update of one agent from its own state and neighbour messages:
///   c_hat+ = c_hat + sum w_ij (c_hat_j - c_hat) + p - q
///   v+     = -alpha [(p + v) - avg_j (p_j + v_j)]
///            + s alpha [R z_i - avg_j R z_j] - kp (c_hat+ - c)
///   p+     = p + v,   q+ = p
/// The averaging terms vanish for an isolated agent.
AgentState agent_step(const AgentState& self, std::span<const NeighborMessage> neighbors, const Point2& z_rotated,
                      const PlanStep& step, const ControllerGains& gains);

/// Centroid estimator alone (dynamic average consensus on the reference
/// signal p with one-step memory q). Returns c_hat(t+1).
Matrix2Xr centroid_estimate_step(const Matrix2Xr& c_hat, const Matrix2Xr& p, const Matrix2Xr& q,
                                 const Eigen::MatrixXd& weights);

/// One synchronous round: every agent updates from time-t values.
SwarmState step_swarm(const SwarmState& state, const netgraph::CommGraph& graph, const PlanStep& step,
                      const ControllerGains& gains);

struct TrackingErrors {
  double formation = 0.0;  ///< ||(p - 1 mean(p)) - s z R^T||_F
  double centroid = 0.0;   ///< ||mean(p) - c||
};

TrackingErrors errors(const SwarmState& state, const PlanStep& step);

struct SegmentLimits {
  int max_steps = 2000;
  double tol_f = 1e-3;
  double tol_c = 1e-3;
};

struct SegmentRecord {
  int t = 0;
  double e_f = 0.0;
  double e_c = 0.0;
};

struct SegmentTrace {
  std::vector<SegmentRecord> records;  // t = 0 .. steps_used
  int steps_used = 0;
  bool converged = false;
  bool cancelled = false;
  std::vector<std::string> warnings;
};

/// Called after every committed round (and once for t = 0). Returning false
/// cancels the segment.
using StepObserver = std::function<bool(int t, const SwarmState&, const TrackingErrors&)>;

/// Runs the controller on a fixed graph until both errors are within
/// tolerance or the step budget is spent.
std::pair<SwarmState, SegmentTrace> run_segment_on_graph(SwarmState state, const netgraph::CommGraph& graph,
                                                         const PlanStep& step, const ControllerGains& gains,
                                                         const SegmentLimits& limits,
                                                         const StepObserver& observer = {});

/// Builds the graph from the current positions with radius radii[mode - 1]
/// and holds it for the whole segment. A disconnected graph produces a
/// warning and a best-effort run.
std::pair<SwarmState, SegmentTrace> run_segment(SwarmState state, const PlanStep& step, const ControllerGains& gains,
                                                std::span<const double> radii, const SegmentLimits& limits,
                                                const StepObserver& observer = {});

}  // namespace hsi::controller
