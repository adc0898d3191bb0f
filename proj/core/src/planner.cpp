#include "hsi/planner.hpp"

#include <cmath>
#include <string>

namespace hsi::planner {
namespace {

void require_spd(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) throw InvalidInput(std::string(name) + " must be square");
  if (!m.isApprox(m.transpose(), 1e-12)) throw InvalidInput(std::string(name) + " must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw InvalidInput(std::string(name) + " must be positive definite");
}

std::vector<Point2> centred(const std::vector<Point2>& v) {
  const auto metrics = geom::polygon_metrics(geom::Polygon(v));
  std::vector<Point2> out = v;
  for (auto& p : out) p -= metrics.centroid;
  return out;
}

double rms_radius(const std::vector<Point2>& v) {
  double s = 0.0;
  for (const auto& p : v) s += p.squaredNorm();
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

Eigen::VectorXd HidState::to_vector() const {
  Eigen::VectorXd h(dimension());
  for (std::size_t i = 0; i < vertices.size(); ++i) h.segment<2>(2 * static_cast<Eigen::Index>(i)) = vertices[i];
  const Eigen::Index k = 2 * static_cast<Eigen::Index>(vertices.size());
  h(k) = scale;
  h(k + 1) = rotation;
  h.segment<2>(k + 2) = centroid;
  return h;
}

HidState HidState::from_vector(const Eigen::VectorXd& h) {
  if (h.size() < 10 || h.size() % 2 != 0) throw InvalidInput("HID vector has invalid dimension");
  HidState s;
  const Eigen::Index v = (h.size() - 4) / 2;
  s.vertices.resize(static_cast<std::size_t>(v));
  for (Eigen::Index i = 0; i < v; ++i) s.vertices[static_cast<std::size_t>(i)] = h.segment<2>(2 * i);
  s.scale = h(2 * v);
  s.rotation = h(2 * v + 1);
  s.centroid = h.segment<2>(2 * v + 2);
  return s;
}

geom::Polygon HidState::polygon() const {
  if (!geom::is_simple(vertices)) throw InvalidShape("HID shape is self-intersecting");
  return geom::Polygon(vertices);
}

HidState hid_from_intention(const geom::Intention& intention) {
  HidState s;
  s.vertices = centred(intention.shape.vertices());
  s.scale = intention.scale;
  s.rotation = intention.rotation;
  s.centroid = intention.centroid;
  return s;
}

PlannerConfig::Matrices PlannerConfig::matrices(int d) const {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  return {a.value_or(a_weight * eye), b.value_or(b_weight * eye), q.value_or(q_weight * eye),
          r.value_or(r_weight * eye), q_f.value_or(qf_weight * eye)};
}

void validate(const PlannerConfig& config, int dimension) {
  if (config.horizon < 1) throw InvalidInput("planner horizon must be at least 1");
  if (config.agents < 1) throw InvalidInput("planner agent count must be positive");
  if (config.mode_radii.empty()) throw InvalidInput("at least one communication mode is required");
  for (double r : config.mode_radii)
    if (!(r > 0.0)) throw InvalidInput("communication radii must be positive");
  if (config.kappa1 < 0 || config.kappa2 <= 0 || config.kappa3 < 0) throw InvalidInput("kappa weights out of range");
  const auto m = config.matrices(dimension);
  for (const auto* mat : {&m.a, &m.b, &m.q, &m.r, &m.q_f})
    if (mat->rows() != dimension || mat->cols() != dimension)
      throw InvalidInput("planner matrices must be " + std::to_string(dimension) + "x" + std::to_string(dimension));
  require_spd(m.q, "Q");
  require_spd(m.r, "R");
  require_spd(m.q_f, "Q_f");
}

LqrSolution riccati_lqr(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                        const Eigen::MatrixXd& r, const Eigen::MatrixXd& q_f, int horizon) {
  const Eigen::Index n = a.rows(), k = b.cols();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != k || r.cols() != k ||
      q_f.rows() != n || q_f.cols() != n)
    throw InvalidInput("riccati_lqr: inconsistent matrix dimensions");
  if (horizon < 1) throw InvalidInput("riccati_lqr: horizon must be at least 1");

  LqrSolution sol;
  sol.gains.resize(static_cast<std::size_t>(horizon));
  sol.values.resize(static_cast<std::size_t>(horizon) + 1);
  sol.values.back() = q_f;
  for (int l = horizon - 1; l >= 0; --l) {
    const Eigen::MatrixXd& next = sol.values[static_cast<std::size_t>(l) + 1];
    const Eigen::MatrixXd s = r + b.transpose() * next * b;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(s);
    if (!lu.isInvertible()) throw NumericError("riccati_lqr: R + B'PB is singular at step " + std::to_string(l));
    const Eigen::MatrixXd gain = lu.solve(b.transpose() * next * a);
    Eigen::MatrixXd p = q + a.transpose() * next * (a - b * gain);
    sol.values[static_cast<std::size_t>(l)] = 0.5 * (p + p.transpose());
    sol.gains[static_cast<std::size_t>(l)] = gain;
  }
  return sol;
}

Rollout hid_rollout(const Eigen::VectorXd& h0, const Eigen::VectorXd& h_desired, const PlannerConfig& config) {
  if (h0.size() != h_desired.size())
    throw InvalidInput("hid_rollout: state dimensions differ (" + std::to_string(h0.size()) + " vs " +
                       std::to_string(h_desired.size()) + ")");
  const int d = static_cast<int>(h0.size());
  validate(config, d);
  const auto m = config.matrices(d);
  const LqrSolution lqr = riccati_lqr(m.a, m.b, m.q, m.r, m.q_f, config.horizon);

  Rollout out;
  out.states.push_back(h0);
  for (int l = 0; l < config.horizon; ++l) {
    const Eigen::VectorXd& h = out.states.back();
    const Eigen::VectorXd err = h - h_desired;
    const Eigen::VectorXd u = -lqr.gains[static_cast<std::size_t>(l)] * err;
    out.cost += err.dot(m.q * err) + u.dot(m.r * u);
    out.controls.push_back(u);
    out.states.push_back(m.a * h + m.b * u);
  }
  const Eigen::VectorXd final_err = out.states.back() - h_desired;
  out.cost += final_err.dot(m.q_f * final_err);
  return out;
}

double mode_cost(const HidState& state, double radius, const PlannerConfig& config) {
  const auto formation = geom::fill_polygon_uniform(state.polygon(), config.agents);
  const Matrix2Xr placed = place_formation(formation.z, state.scale, state.rotation, state.centroid);
  const auto graph = netgraph::build_nu_disk_graph(placed, radius);
  const auto con = netgraph::connectivity_cost(graph, config.kappa1, config.kappa2);
  const auto com = netgraph::communication_cost(graph, config.kappa3);
  if (!con || !com) return kInfeasible;
  return *con + *com;
}

std::vector<int> argmin_schedule(const Eigen::MatrixXd& costs) {
  std::vector<int> modes;
  for (Eigen::Index l = 0; l < costs.rows(); ++l) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < costs.cols(); ++k)
      if (costs(l, k) < costs(l, best)) best = k;
    modes.push_back(static_cast<int>(best) + 1);
  }
  return modes;
}

ModeSchedule schedule_modes(const Eigen::MatrixXd& costs, double switch_penalty) {
  const Eigen::Index steps = costs.rows(), m = costs.cols();
  if (m < 1) throw InvalidInput("schedule_modes: no modes");
  for (Eigen::Index l = 0; l < steps; ++l) {
    bool any = false;
    for (Eigen::Index k = 0; k < m; ++k) any = any || std::isfinite(costs(l, k));
    if (!any)
      throw PlanningError("every communication mode is disconnected at plan step " + std::to_string(l + 1),
                          static_cast<int>(l) + 1);
  }

  // value(l, k): best cost of steps l..end given mode k at step l.
  Eigen::MatrixXd value(steps, m);
  Eigen::MatrixXi next(steps, m);
  for (Eigen::Index l = steps - 1; l >= 0; --l) {
    for (Eigen::Index k = 0; k < m; ++k) {
      double tail = 0.0;
      Eigen::Index arg = k;
      if (l + 1 < steps) {
        tail = kInfeasible;
        for (Eigen::Index j = 0; j < m; ++j) {
          const double c = value(l + 1, j) + (j == k ? 0.0 : switch_penalty);
          if (c < tail) {
            tail = c;
            arg = j;
          }
        }
      }
      value(l, k) = costs(l, k) + tail;
      next(l, k) = static_cast<int>(arg);
    }
  }

  ModeSchedule out;
  out.costs = costs;
  if (steps == 0) return out;
  Eigen::Index k = 0;
  for (Eigen::Index j = 1; j < m; ++j)
    if (value(0, j) < value(0, k)) k = j;
  out.total = value(0, k);
  for (Eigen::Index l = 0; l < steps; ++l) {
    out.modes.push_back(static_cast<int>(k) + 1);
    k = next(l, k);
  }
  return out;
}

ModeSchedule mode_schedule(const std::vector<HidState>& steps, const PlannerConfig& config) {
  const auto m = static_cast<Eigen::Index>(config.mode_radii.size());
  Eigen::MatrixXd costs(static_cast<Eigen::Index>(steps.size()), m);
  for (std::size_t l = 0; l < steps.size(); ++l) {
    for (Eigen::Index k = 0; k < m; ++k) {
      try {
        costs(static_cast<Eigen::Index>(l), k) = mode_cost(steps[l], config.mode_radii[static_cast<std::size_t>(k)], config);
      } catch (const InvalidShape& e) {
        throw PlanningError(std::string("plan step ") + std::to_string(l + 1) + ": " + e.what(),
                            static_cast<int>(l) + 1);
      }
    }
  }
  return schedule_modes(costs, config.switch_penalty);
}

std::pair<HidState, HidState> align_states(const HidState& current, const HidState& goal) {
  const std::size_t n = std::max(current.vertices.size(), goal.vertices.size());
  HidState a = current, b = goal;
  a.vertices = geom::refine_to(geom::Polygon(current.vertices), n).vertices();
  b.vertices = geom::refine_to(geom::Polygon(goal.vertices), n).vertices();

  // Cyclic vertex shift of the goal that best matches the current shape,
  // both normalised to unit RMS radius about their centroids.
  const auto ca = centred(a.vertices), cb = centred(b.vertices);
  const double ra = rms_radius(ca), rb = rms_radius(cb);
  std::size_t best_shift = 0;
  double best = kInfeasible;
  for (std::size_t shift = 0; shift < n; ++shift) {
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) d += (ca[i] / ra - cb[(i + shift) % n] / rb).squaredNorm();
    if (d < best - 1e-12) {
      best = d;
      best_shift = shift;
    }
  }
  std::vector<Point2> rotated(n);
  for (std::size_t i = 0; i < n; ++i) rotated[i] = b.vertices[(i + best_shift) % n];
  b.vertices = std::move(rotated);

  b.rotation = a.rotation + wrap_angle(goal.rotation - a.rotation);
  return {a, b};
}

Plan plan(const HidState& current, const geom::Intention& intention, const PlannerConfig& config) {
  const auto [start, goal] = align_states(current, hid_from_intention(intention));
  const Rollout rollout = hid_rollout(start.to_vector(), goal.to_vector(), config);

  Plan out;
  out.controls = rollout.controls;
  out.hid_cost = rollout.cost;
  for (const auto& h : rollout.states) out.hid_states.push_back(HidState::from_vector(h));

  const std::vector<HidState> targets(out.hid_states.begin() + 1, out.hid_states.end());
  for (std::size_t l = 0; l < targets.size(); ++l) {
    if (!(targets[l].scale > 0.0))
      throw PlanningError("non-positive scale at plan step " + std::to_string(l + 1), static_cast<int>(l) + 1);
    if (!geom::is_simple(targets[l].vertices))
      throw PlanningError("intermediate shape self-intersects at plan step " + std::to_string(l + 1),
                          static_cast<int>(l) + 1);
  }
  const ModeSchedule schedule = mode_schedule(targets, config);
  out.mode_costs = schedule.costs;

  for (std::size_t l = 0; l < targets.size(); ++l) {
    const auto formation = geom::fill_polygon_uniform(targets[l].polygon(), config.agents);
    controller::PlanStep step;
    step.z = formation.z;
    step.scale = targets[l].scale;
    step.rotation = targets[l].rotation;
    step.centroid = targets[l].centroid;
    step.mode = schedule.modes[l];
    out.steps.push_back(std::move(step));
  }
  out.total_cost = out.hid_cost + schedule.total;
  return out;
}

}  // namespace hsi::planner
