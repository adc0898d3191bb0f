#include "hsi/harness/scenario.hpp"

#include "hsi/json_io.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>

namespace hsi::harness {
namespace {

using nlohmann::json;

/// Walks a JSON object with a field path for error messages and rejects keys
/// that were never read.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ScenarioError(path_.empty() ? "/" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) {
    known_.insert(key);
    if (!j_.contains(key)) throw ScenarioError(field(key), "missing required field");
    return j_.at(key);
  }

  std::string field(const std::string& key) const { return path_ + "/" + key; }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ScenarioError(field(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ScenarioError(field(key), "must be finite");
    return d;
  }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw ScenarioError(field(key), "expected an integer");
    return v.get<int>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ScenarioError(field(key), "expected a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!known_.count(key)) throw ScenarioError(field(key), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

template <typename F>
auto wrap(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScenarioError(field, e.what());
  }
}

geom::Intention read_intention(const json& j, const std::string& path) {
  Reader r(j, path);
  const geom::Polygon shape = wrap(r.field("shape"), [&] { return json_io::polygon_from_json(r.at("shape")); });
  const double scale = r.number("scale", 1.0);
  if (!(scale > 0.0)) throw ScenarioError(r.field("scale"), "must be positive");
  if (r.has("rotation") && r.has("rotation_deg"))
    throw ScenarioError(r.field("rotation_deg"), "give either rotation or rotation_deg, not both");
  double rotation = r.number("rotation", 0.0);
  if (r.has("rotation_deg")) rotation = r.number("rotation_deg", 0.0) * M_PI / 180.0;
  Point2 centroid = Point2::Zero();
  if (r.has("centroid"))
    centroid = wrap(r.field("centroid"), [&] { return json_io::point_from_json(r.at("centroid")); });
  r.finish();
  return geom::make_intention(shape, scale, rotation, centroid);
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ScenarioError(field, what);
}

}  // namespace

controller::SwarmState Scenario::initial_state() const {
  switch (initial.kind) {
    case InitialKind::formation: {
      const auto f = geom::fill_polygon_uniform(current.shape, agents);
      return controller::SwarmState::at_rest(place_formation(f.z, current.scale, current.rotation, current.centroid));
    }
    case InitialKind::random: {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> ux(initial.box_min.x(), initial.box_max.x());
      std::uniform_real_distribution<double> uy(initial.box_min.y(), initial.box_max.y());
      Matrix2Xr p(agents, 2);
      for (int i = 0; i < agents; ++i) {
        p(i, 0) = ux(rng);
        p(i, 1) = uy(rng);
      }
      return controller::SwarmState::at_rest(p);
    }
    case InitialKind::explicit_positions:
      return controller::SwarmState::at_rest(initial.positions);
  }
  throw InvalidInput("unknown initial position kind");
}

Scenario parse_scenario(const json& j) {
  Reader root(j, "");
  Scenario s;
  s.name = root.string("name", "scenario");
  s.agents = root.integer("agents", 2);
  require(s.agents >= 1, root.field("agents"), "must be at least 1");
  if (root.has("seed")) {
    const json& seed = root.at("seed");
    require(seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<long long>() >= 0), root.field("seed"),
            "expected a non-negative integer");
    s.seed = seed.get<std::uint64_t>();
  }

  s.goal = read_intention(root.at("goal"), "/goal");
  // Without an explicit start the swarm sits on the goal shape at unit
  // scale around the origin.
  s.current = root.has("current") ? read_intention(root.at("current"), "/current")
                                  : geom::make_intention(s.goal.shape, 1.0, 0.0, Point2::Zero());

  if (root.has("initial")) {
    Reader r(root.at("initial"), "/initial");
    const std::string kind = r.string("kind", "formation");
    if (kind == "formation") {
      s.initial.kind = InitialKind::formation;
    } else if (kind == "random") {
      s.initial.kind = InitialKind::random;
      if (r.has("box_min")) s.initial.box_min = wrap(r.field("box_min"), [&] { return json_io::point_from_json(r.at("box_min")); });
      if (r.has("box_max")) s.initial.box_max = wrap(r.field("box_max"), [&] { return json_io::point_from_json(r.at("box_max")); });
      require((s.initial.box_max - s.initial.box_min).minCoeff() > 0, r.field("box_max"), "box must have positive size");
    } else if (kind == "positions") {
      s.initial.kind = InitialKind::explicit_positions;
      s.initial.positions = wrap(r.field("positions"), [&] { return json_io::matrix_from_json(r.at("positions")); });
      require(s.initial.positions.rows() == s.agents, r.field("positions"), "row count must equal agents");
      require(s.initial.positions.allFinite(), r.field("positions"), "must be finite");
    } else {
      throw ScenarioError(r.field("kind"), "expected formation, random or positions");
    }
    r.finish();
  }

  if (root.has("gains")) {
    Reader r(root.at("gains"), "/gains");
    s.gains.alpha = r.number("alpha", s.gains.alpha);
    s.gains.kp = r.number("kp", s.gains.kp);
    r.finish();
  }
  require(s.gains.alpha > 0 && s.gains.alpha < 1, "/gains/alpha", "must lie in (0, 1)");
  require(s.gains.kp > 0 && s.gains.kp < 1, "/gains/kp", "must lie in (0, 1)");

  planner::PlannerConfig& pc = s.planner;
  if (root.has("planner")) {
    Reader r(root.at("planner"), "/planner");
    pc.horizon = r.integer("horizon", pc.horizon);
    pc.a_weight = r.number("a", pc.a_weight);
    pc.b_weight = r.number("b", pc.b_weight);
    pc.q_weight = r.number("q", pc.q_weight);
    pc.r_weight = r.number("r", pc.r_weight);
    pc.qf_weight = r.number("q_f", pc.qf_weight);
    pc.kappa1 = r.number("kappa1", pc.kappa1);
    pc.kappa2 = r.number("kappa2", pc.kappa2);
    pc.kappa3 = r.number("kappa3", pc.kappa3);
    pc.switch_penalty = r.number("switch_penalty", pc.switch_penalty);
    if (r.has("mode_radii")) {
      const json& radii = r.at("mode_radii");
      require(radii.is_array() && !radii.empty(), r.field("mode_radii"), "expected a non-empty array");
      pc.mode_radii.clear();
      for (const auto& v : radii) {
        require(v.is_number() && v.get<double>() > 0, r.field("mode_radii"), "radii must be positive numbers");
        pc.mode_radii.push_back(v.get<double>());
      }
    }
    r.finish();
  }
  pc.agents = s.agents;
  require(pc.horizon >= 1, "/planner/horizon", "must be at least 1");
  require(pc.q_weight > 0, "/planner/q", "must be positive");
  require(pc.r_weight > 0, "/planner/r", "must be positive");
  require(pc.qf_weight > 0, "/planner/q_f", "must be positive");
  require(pc.kappa1 >= 0, "/planner/kappa1", "must be non-negative");
  require(pc.kappa2 > 0, "/planner/kappa2", "must be positive");
  require(pc.kappa3 >= 0, "/planner/kappa3", "must be non-negative");
  require(pc.switch_penalty >= 0, "/planner/switch_penalty", "must be non-negative");

  if (root.has("limits")) {
    Reader r(root.at("limits"), "/limits");
    s.limits.max_steps = r.integer("max_steps", s.limits.max_steps);
    s.limits.tol_f = r.number("tol_f", s.limits.tol_f);
    s.limits.tol_c = r.number("tol_c", s.limits.tol_c);
    r.finish();
  }
  require(s.limits.max_steps >= 0, "/limits/max_steps", "must be non-negative");
  require(s.limits.tol_f > 0, "/limits/tol_f", "must be positive");
  require(s.limits.tol_c > 0, "/limits/tol_c", "must be positive");

  s.timescales.controller_steps_per_interval = s.limits.max_steps;
  s.timescales.intervals_per_human_step = pc.horizon;
  if (root.has("timescales")) {
    Reader r(root.at("timescales"), "/timescales");
    s.timescales.controller_steps_per_interval =
        r.integer("controller_steps_per_interval", s.timescales.controller_steps_per_interval);
    s.timescales.intervals_per_human_step = r.integer("intervals_per_human_step", s.timescales.intervals_per_human_step);
    r.finish();
  }
  require(s.limits.max_steps <= s.timescales.controller_steps_per_interval,
          "/timescales/controller_steps_per_interval", "must be at least limits.max_steps");
  require(pc.horizon <= s.timescales.intervals_per_human_step, "/timescales/intervals_per_human_step",
          "must be at least planner.horizon");

  s.record_every = root.integer("record_every", 1);
  require(s.record_every >= 1, root.field("record_every"), "must be at least 1");
  root.finish();

  // A shape that cannot hold the swarm is a scenario error, not a late failure.
  wrap("/current/shape", [&] { return geom::fill_polygon_uniform(s.current.shape, s.agents); });
  wrap("/goal/shape", [&] { return geom::fill_polygon_uniform(s.goal.shape, s.agents); });
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("/", "cannot open scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("/", std::string("parse error: ") + e.what());
  }
  return parse_scenario(j);
}

json to_json(const Scenario& s) {
  auto intention = [](const geom::Intention& i) {
    return json{{"shape", json_io::to_json(i.shape)},
                {"scale", i.scale},
                {"rotation", i.rotation},
                {"centroid", json_io::to_json(i.centroid)}};
  };
  json initial;
  switch (s.initial.kind) {
    case InitialKind::formation: initial = {{"kind", "formation"}}; break;
    case InitialKind::random:
      initial = {{"kind", "random"},
                 {"box_min", json_io::to_json(s.initial.box_min)},
                 {"box_max", json_io::to_json(s.initial.box_max)}};
      break;
    case InitialKind::explicit_positions:
      initial = {{"kind", "positions"}, {"positions", json_io::to_json(s.initial.positions)}};
      break;
  }
  const auto& pc = s.planner;
  return {{"name", s.name},
          {"agents", s.agents},
          {"seed", s.seed},
          {"current", intention(s.current)},
          {"goal", intention(s.goal)},
          {"initial", initial},
          {"gains", {{"alpha", s.gains.alpha}, {"kp", s.gains.kp}}},
          {"planner",
           {{"horizon", pc.horizon},
            {"a", pc.a_weight},
            {"b", pc.b_weight},
            {"q", pc.q_weight},
            {"r", pc.r_weight},
            {"q_f", pc.qf_weight},
            {"kappa1", pc.kappa1},
            {"kappa2", pc.kappa2},
            {"kappa3", pc.kappa3},
            {"switch_penalty", pc.switch_penalty},
            {"mode_radii", pc.mode_radii}}},
          {"limits", {{"max_steps", s.limits.max_steps}, {"tol_f", s.limits.tol_f}, {"tol_c", s.limits.tol_c}}},
          {"timescales",
           {{"controller_steps_per_interval", s.timescales.controller_steps_per_interval},
            {"intervals_per_human_step", s.timescales.intervals_per_human_step}}},
          {"record_every", s.record_every}};
}

}  // namespace hsi::harness
