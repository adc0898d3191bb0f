#pragma once

#include "hsi/controller.hpp"
#include "hsi/geom.hpp"
#include "hsi/planner.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace hsi::harness {

/// Parse or validation failure; `field()` is a JSON-pointer style path.
class ScenarioError : public Error {
 public:
  ScenarioError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class InitialKind { formation, random, explicit_positions };

struct InitialPositions {
  InitialKind kind = InitialKind::formation;
  Matrix2Xr positions;                        ///< explicit_positions only
  Point2 box_min{-10, -10}, box_max{10, 10};  ///< random only
};

/// Controller-step ratios standing in for the interaction timescales.
struct Timescales {
  int controller_steps_per_interval = 2000;  ///< tau_int / tau_s
  int intervals_per_human_step = 8;          ///< tau_h / tau_int
};

struct Scenario {
  std::string name;
  int agents = 2;
  std::uint64_t seed = 0;
  geom::Intention current;  ///< configuration the swarm starts in
  InitialPositions initial;
  controller::ControllerGains gains;
  planner::PlannerConfig planner;
  geom::Intention goal;
  controller::SegmentLimits limits;
  Timescales timescales;
  int record_every = 1;  ///< positions written to the trace every n steps

  /// Starting swarm state, deterministic in the seed.
  controller::SwarmState initial_state() const;
};

/// Strict parse: unknown keys and out-of-range values throw ScenarioError.
Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);

nlohmann::json to_json(const Scenario& s);

}  // namespace hsi::harness
