#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvplan/decision.hpp"
#include "mvplan/planner.hpp"
#include "mvplan/scenario_io.hpp"

namespace mvplan {

enum class SimMode { Full, DecisionOnly };

std::string_view to_string(SimMode m);
/// Throws SchemaError on an unknown tag.
SimMode sim_mode_from_string(std::string_view s);

struct SimConfig {
  double tick = 0.1;
  double replan_period = 0.5;
  double decision_period = 1.5;
  double decision_horizon = 10.5;
  double planning_horizon = 3.0;
  double max_duration = 30.0;
  double settle_time = 2.0;  ///< time in the target lane before an intention counts as complete
  std::uint64_t seed = 0;
  SimMode mode = SimMode::Full;
  int max_iterations = 3000;
  double c_z = kDefaultObstacleConstant;

  /// Throws InvariantViolation when the periods are not nested multiples.
  void validate() const;
};

struct VehicleMeta {
  int id = 0;
  bool controlled = false;
  VehicleGeometry geometry;
  int target_lane = 0;
  std::string behavior;
};

struct TickRecord {
  int tick = 0;
  int vehicle_id = 0;
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double theta = 0.0;
  double s = 0.0;
  double d = 0.0;
  int lane = 0;
  std::string action;
};

struct SimEvent {
  int tick = 0;
  int vehicle_id = 0;  ///< 0 for flow-level events
  std::string kind;    ///< decision, plan_failure, abort, emergency, collision, complete
  std::string detail;
};

struct SimLog {
  std::string scenario_id;
  std::uint64_t seed = 0;
  SimMode mode = SimMode::Full;
  double tick = 0.1;
  double lane_width = 3.5;
  double delta_d = 1.75;
  double max_duration = 30.0;
  double settle_time = 2.0;
  std::vector<VehicleMeta> vehicles;
  std::vector<TickRecord> rows;  ///< tick-major, vehicle id order within a tick
  std::vector<SimEvent> events;
  std::vector<int> expanded_nodes;  ///< one entry per decision search
  int ticks = 0;                    ///< number of logged ticks
  bool collision = false;
};

struct Metrics {
  bool success = false;
  double avg_expanded_nodes = 0.0;
  std::optional<double> avg_finish_time;  ///< absent when a controlled vehicle never settled
  std::optional<double> min_distance;     ///< absent for single-vehicle logs
  bool collision = false;
  int aborts = 0;
  double duration = 0.0;
  std::string scenario_id;
  std::uint64_t seed = 0;
  SimMode mode = SimMode::Full;
};

SimLog run(const Scenario& scenario, const WeightSet& weights, const SimConfig& cfg);

Metrics compute_metrics(const SimLog& log);

/// Per-vehicle first time inside the target lane that lasts through the end
/// of the log; absent when the vehicle is not inside at the end.
std::vector<std::optional<double>> finish_times(const SimLog& log);

/// Controlled-vehicle state on a tick of a decision-only step: the step's
/// Table-1 transition interpolated linearly at fraction `f` in [0, 1].
DecisionState decision_only_step(const DecisionState& start, Action action, const ActionParams& params,
                                 double speed_limit, double f);

std::string serialize_log_csv(const SimLog& log);
/// Reads rows back from serialize_log_csv output (metadata stays empty).
std::vector<TickRecord> parse_log_csv(std::string_view text);
std::string serialize_events_csv(const SimLog& log);
std::string serialize_metrics(const Metrics& m);
Metrics parse_metrics(std::string_view text);

struct Aggregate {
  int runs = 0;
  int successes = 0;
  double success_rate = 0.0;
  double avg_expanded_nodes = 0.0;
  std::optional<double> avg_finish_time;  ///< over successful runs
  std::optional<double> min_distance;     ///< minimum over runs
  std::string mode;
};

Aggregate aggregate(const std::vector<Metrics>& runs);
std::string serialize_aggregate(const Aggregate& a);
Aggregate parse_aggregate(std::string_view text);

}  // namespace mvplan
