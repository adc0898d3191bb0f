#include "hsi/harness/session.hpp"

#include "hsi/json_io.hpp"

#include <cmath>

namespace hsi::harness {

using nlohmann::json;

namespace {

double number_field(const json& msg, const char* key) {
  if (!msg.contains(key) || !msg.at(key).is_number()) throw InvalidInput(std::string("missing numeric field '") + key + "'");
  const double v = msg.at(key).get<double>();
  if (!std::isfinite(v)) throw InvalidInput(std::string("field '") + key + "' must be finite");
  return v;
}

json world_shape(const planner::HidState& h) {
  json out = json::array();
  const Eigen::Matrix2d r = rotation(h.rotation);
  for (const auto& v : h.vertices) out.push_back(json_io::to_json(Point2(h.centroid + h.scale * (r * v))));
  return out;
}

}  // namespace

Session::Session(Scenario base, Sink sink, SessionOptions options)
    : base_(std::move(base)), sink_(std::move(sink)), options_(options) {
  swarm_ = base_.initial_state();
  hid_ = planner::hid_from_intention(base_.current);
}

Session::~Session() { cancel_worker(); }

void Session::send(const json& message) {
  std::lock_guard lock(send_mutex_);
  if (sink_) sink_(message);
}

void Session::error(const std::string& msg) { send({{"type", "Error"}, {"msg", msg}}); }

controller::SwarmState Session::swarm() const {
  std::lock_guard lock(state_mutex_);
  return swarm_;
}

void Session::handle_line(std::string_view line) {
  json msg;
  try {
    msg = json::parse(line);
  } catch (const json::parse_error& e) {
    error(std::string("malformed message: ") + e.what());
    return;
  }
  handle(msg);
}

void Session::handle(const json& msg) {
  if (!msg.is_object() || !msg.contains("type") || !msg.at("type").is_string()) {
    error("message must be an object with a string 'type'");
    return;
  }
  const std::string type = msg.at("type").get<std::string>();
  try {
    if (type == "AddVertex") {
      const Point2 p(number_field(msg, "x"), number_field(msg, "y"));
      std::lock_guard lock(state_mutex_);
      draft_vertices_.push_back(p);
    } else if (type == "ClearShape") {
      std::lock_guard lock(state_mutex_);
      draft_vertices_.clear();
    } else if (type == "SetRotation") {
      const double rad = number_field(msg, "rad");
      std::lock_guard lock(state_mutex_);
      draft_rotation_ = rad;
    } else if (type == "SetScale") {
      const double s = number_field(msg, "s");
      if (!(s > 0.0)) throw InvalidInput("scale must be positive");
      std::lock_guard lock(state_mutex_);
      draft_scale_ = s;
    } else if (type == "SetCentroid") {
      const Point2 c(number_field(msg, "x"), number_field(msg, "y"));
      std::lock_guard lock(state_mutex_);
      draft_centroid_ = c;
    } else if (type == "PointerEvent") {
      // Decoder passthrough: the client owns the mapping to draft edits.
      if (!msg.contains("kind") || !msg.at("kind").is_string()) throw InvalidInput("PointerEvent needs a string 'kind'");
    } else if (type == "Commit") {
      commit();
      return;
    } else {
      error("unknown message type '" + type + "'");
      return;
    }
  } catch (const std::exception& e) {
    error(type + ": " + e.what());
    return;
  }
  send({{"type", "Ack"}, {"for", type}});
}

void Session::commit() {
  geom::Intention intention;
  {
    std::lock_guard lock(state_mutex_);
    try {
      intention = geom::make_intention(geom::Polygon(draft_vertices_), draft_scale_, draft_rotation_, draft_centroid_);
      geom::fill_polygon_uniform(intention.shape, base_.agents);
    } catch (const std::exception& e) {
      error(std::string("Commit: ") + e.what());
      return;
    }
  }
  cancel_worker();
  send({{"type", "Ack"}, {"for", "Commit"}});

  controller::SwarmState state;
  planner::HidState current;
  {
    std::lock_guard lock(state_mutex_);
    state = swarm_;
    current = hid_;
  }
  cancel_ = false;
  running_ = true;
  worker_ = std::thread(&Session::work, this, std::move(intention), std::move(state), std::move(current));
}

void Session::cancel_worker() {
  cancel_ = true;
  if (worker_.joinable()) worker_.join();
  running_ = false;
}

void Session::wait_idle() {
  if (worker_.joinable()) worker_.join();
  running_ = false;
}

void Session::work(geom::Intention intention, controller::SwarmState state, planner::HidState current) {
  struct Idle {
    std::atomic<bool>& flag;
    ~Idle() { flag = false; }
  } idle{running_};
  try {
    const planner::Plan plan = planner::plan(current, intention, base_.planner);
    json shapes = json::array(), modes = json::array();
    for (std::size_t l = 1; l < plan.hid_states.size(); ++l) shapes.push_back(world_shape(plan.hid_states[l]));
    for (const auto& s : plan.steps) modes.push_back(s.mode);
    send({{"type", "PlanPreview"}, {"shapes", shapes}, {"modes", modes}});

    const int every = std::max(1, options_.update_every);
    auto observer = [&](int segment, int t, int mode, const controller::SwarmState& s,
                        const controller::TrackingErrors& e) {
      if (cancel_) return false;
      {
        std::lock_guard lock(state_mutex_);
        swarm_ = s;
        hid_ = plan.hid_states[static_cast<std::size_t>(segment)];
      }
      if (t > 0) ++rounds_;
      if (t % every == 0) {
        send({{"type", "StateUpdate"},
              {"t", rounds_},
              {"positions", json_io::to_json(s.p)},
              {"e_f", e.formation},
              {"e_c", e.centroid},
              {"segment", segment},
              {"mode", mode}});
      }
      if (options_.round_delay.count() > 0) std::this_thread::sleep_for(options_.round_delay);
      return !cancel_;
    };
    auto outcome = execute_plan(std::move(state), plan, base_.gains, base_.planner.mode_radii, base_.limits, observer);
    if (outcome.cancelled) return;

    bool converged = true;
    for (const auto& seg : outcome.segments) converged = converged && seg.trace.converged;
    const auto& last = outcome.segments.back();
    const auto& rec = last.trace.records.back();
    if (rec.t % every != 0) {
      send({{"type", "StateUpdate"},
            {"t", rounds_},
            {"positions", json_io::to_json(outcome.state.p)},
            {"e_f", rec.e_f},
            {"e_c", rec.e_c},
            {"segment", last.segment},
            {"mode", last.mode}});
    }
    {
      std::lock_guard lock(state_mutex_);
      swarm_ = outcome.state;
      hid_ = plan.hid_states.back();
    }
    send({{"type", "Done"}, {"converged", converged}, {"e_f", rec.e_f}, {"e_c", rec.e_c}});
  } catch (const std::exception& e) {
    error(std::string("execution failed: ") + e.what());
  }
}

}  // namespace hsi::harness
