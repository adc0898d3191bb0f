#pragma once

#include "hsi/controller.hpp"
#include "hsi/geom.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace hsi::planner {

/// State of the human-interpretable dynamics: polygon vertices (centred on
/// their area centroid), scale, rotation and centroid. Flattened as
/// h = [x0, y0, x1, y1, ..., s, theta, cx, cy].
struct HidState {
  std::vector<Point2> vertices;
  double scale = 1.0;
  double rotation = 0.0;
  Point2 centroid = Point2::Zero();

  int dimension() const { return 2 * static_cast<int>(vertices.size()) + 4; }
  Eigen::VectorXd to_vector() const;
  static HidState from_vector(const Eigen::VectorXd& h);
  /// Throws InvalidShape if the vertices do not form a simple polygon.
  geom::Polygon polygon() const;
};

/// Shape recentred on its area centroid; scale, rotation, centroid copied.
HidState hid_from_intention(const geom::Intention& intention);

struct PlannerConfig {
  int horizon = 8;
  // Scalar multiples of the identity; full matrices below override them.
  double a_weight = 1.0;
  double b_weight = 1.0;
  double q_weight = 1.0;
  double r_weight = 100.0;
  double qf_weight = 1500.0;
  std::optional<Eigen::MatrixXd> a, b, q, r, q_f;

  std::vector<double> mode_radii{10.0, 40.0, 150.0};
  double kappa1 = 1e6;
  double kappa2 = 0.05;
  double kappa3 = 2e4;
  int agents = 50;
  /// Cost added whenever consecutive steps use different modes. Zero
  /// reproduces the per-step argmin.
  double switch_penalty = 0.0;

  struct Matrices {
    Eigen::MatrixXd a, b, q, r, q_f;
  };
  /// Resolves the dynamics and weight matrices for HID dimension d.
  Matrices matrices(int d) const;
};

/// Throws InvalidInput on non-positive-definite weights, empty mode table,
/// horizon < 1 or agents < 1.
void validate(const PlannerConfig& config, int dimension);

struct LqrSolution {
  std::vector<Eigen::MatrixXd> gains;   ///< K(0) .. K(N-1)
  std::vector<Eigen::MatrixXd> values;  ///< P(0) .. P(N), P(N) = Q_f
};

/// Finite-horizon backward Riccati recursion for
///   sum_{l<N} x'Qx + u'Ru + x(N)'Q_f x(N),  x+ = Ax + Bu,  u = -K x.
LqrSolution riccati_lqr(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                        const Eigen::MatrixXd& r, const Eigen::MatrixXd& q_f, int horizon);

struct Rollout {
  std::vector<Eigen::VectorXd> states;    ///< h(0) .. h(N)
  std::vector<Eigen::VectorXd> controls;  ///< u(0) .. u(N-1)
  double cost = 0.0;                      ///< J_HID
};

Rollout hid_rollout(const Eigen::VectorXd& h0, const Eigen::VectorXd& h_desired, const PlannerConfig& config);

inline constexpr double kInfeasible = std::numeric_limits<double>::infinity();

/// cost(l, mu) = J_CON + J_COM of the nu_mu-disk graph over the formation
/// regenerated from `state`, or kInfeasible when disconnected.
double mode_cost(const HidState& state, double radius, const PlannerConfig& config);

struct ModeSchedule {
  std::vector<int> modes;  ///< 1-based, one per step
  Eigen::MatrixXd costs;   ///< steps x modes, kInfeasible where disconnected
  double total = 0.0;      ///< sum of chosen costs plus switch penalties
};

/// Per-step argmin (lowest index on ties).
std::vector<int> argmin_schedule(const Eigen::MatrixXd& costs);

/// Backward dynamic programming over the mode sequence with a constant
/// penalty for every switch. Throws PlanningError naming the first step at
/// which every mode is infeasible.
ModeSchedule schedule_modes(const Eigen::MatrixXd& costs, double switch_penalty);

/// Evaluates every (step, mode) cost for h(1) .. h(N) and schedules.
ModeSchedule mode_schedule(const std::vector<HidState>& steps, const PlannerConfig& config);

struct Plan {
  std::vector<controller::PlanStep> steps;
  std::vector<HidState> hid_states;       ///< h(0) .. h(N)
  std::vector<Eigen::VectorXd> controls;  ///< u(0) .. u(N-1)
  Eigen::MatrixXd mode_costs;
  double hid_cost = 0.0;
  double total_cost = 0.0;
};

/// Aligns the goal with the current HID state (vertex count, cyclic vertex
/// order, shortest rotation), rolls out the HID under LQR, schedules modes
/// and regenerates one formation per step.
Plan plan(const HidState& current, const geom::Intention& intention, const PlannerConfig& config);

/// Goal state prepared for rollout from `current`: same vertex count, vertex
/// order rotated to best match, rotation unwrapped onto the shortest path.
std::pair<HidState, HidState> align_states(const HidState& current, const HidState& goal);

}  // namespace hsi::planner
