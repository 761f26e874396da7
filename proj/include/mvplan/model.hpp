#pragma once

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvplan/geometry.hpp"

namespace mvplan {

enum class Action { KS, AC, DC, LCL, LCR, KL };

inline constexpr std::array<Action, 5> kControlledActions{Action::KS, Action::AC, Action::DC, Action::LCL,
                                                          Action::LCR};

std::string_view to_string(Action a);
/// Throws SchemaError on an unknown tag.
Action action_from_string(std::string_view tag);
inline bool is_lane_change(Action a) { return a == Action::LCL || a == Action::LCR; }

struct VehicleGeometry {
  double length = 5.0;
  double width = 2.0;
};

struct SafetyParams {
  double tau = 0.5;  ///< reaction time (s)
  double mth = 3.0;  ///< minimum time headway (s)
};

struct ActionParams {
  double a_acc = 0.6;
  double a_dec = 0.6;
  double delta_d = 1.75;  ///< partial lane-change width (m)
  double dt = 1.5;        ///< decision step (s)
};

/// Decision-level Frenet state [s, d, v].
struct DecisionState {
  double s = 0.0;
  double d = 0.0;
  double v = 0.0;
};

enum class Role { Controlled, Uncontrolled };
enum class Behavior { Aggressive, Normal, Conservative };

std::string_view to_string(Role r);
std::string_view to_string(Behavior b);
Role role_from_string(std::string_view s);
Behavior behavior_from_string(std::string_view s);

/// Cooperation factor of a behavior type (0.1 / 0.5 / 0.9).
double default_gamma(Behavior b);

struct VehicleProfile {
  Role role = Role::Controlled;
  Behavior behavior = Behavior::Normal;
  double gamma = 0.5;
  std::string weights_id = "normal";
  std::optional<int> target_lane;  ///< empty = keep the initial lane
};

/// Scripted acceleration override of an uncontrolled vehicle on [t_start, t_end).
struct ScriptSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  double accel = 0.0;
};

struct VehicleSpec {
  int id = 0;
  VehicleGeometry geometry;
  VehicleProfile profile;
  double s0 = 0.0;
  int lane0 = 0;
  double v0 = 0.0;
  std::optional<double> desired_speed;  ///< car-following v0; defaults to the speed limit
  std::vector<ScriptSegment> script;

  int target_lane() const { return profile.target_lane.value_or(lane0); }
  bool controlled() const { return profile.role == Role::Controlled; }
};

struct RampSpec {
  int merge_lane = 0;  ///< always the rightmost lane
  double merge_end_s = 0.0;
};

/// Road layout. Lane 0 is the leftmost lane; lane i has its center at
/// d = i * lane_width relative to the reference line (the lane-0 center).
struct Road {
  int lanes = 1;
  double lane_width = 3.5;
  double speed_limit = 16.7;
  ReferencePath reference;
  std::vector<ReferencePath> lane_paths;
  std::optional<RampSpec> ramp;

  double lane_center(int lane) const { return lane * lane_width; }
  /// Nearest lane center; ties resolve to the lower (left) lane.
  int nearest_lane(double d) const;
  /// Whether `lane` exists at arclength `s` (the merge lane ends at merge_end_s).
  bool lane_exists(int lane, double s) const;
  /// Rightmost lane that exists at arclength s.
  int rightmost_lane(double s) const;
};

/// Lanes covered by a vehicle at lateral offset d: the nearest lane plus,
/// when the vehicle is more than delta_d / 2 off that center, the neighbor
/// it leans toward (mid lane change).
struct LaneOccupancy {
  int primary = 0;
  int secondary = -1;
  bool covers(int lane) const { return lane == primary || lane == secondary; }
  bool intersects(const LaneOccupancy& o) const {
    return covers(o.primary) || (o.secondary >= 0 && covers(o.secondary));
  }
};

LaneOccupancy lane_occupancy(const Road& road, double d, double delta_d);

struct Scenario {
  std::string id;
  Road road;
  SafetyParams safety;
  ActionParams actions;
  std::vector<VehicleSpec> vehicles;  ///< sorted by id

  const VehicleSpec& vehicle(int id) const;
  std::vector<int> controlled_ids() const;
};

/// Table-1 state change. Speed is clamped to [0, speed_limit]; when the
/// clamp to zero engages the displacement is v^2 / (2 a_dec).
/// Throws UnsupportedAction for KL.
DecisionState apply_action(const DecisionState& state, Action a, const ActionParams& params,
                           double speed_limit = std::numeric_limits<double>::infinity());

/// D_s = v tau + MTH max(v - v_lead, 0).
double shortest_safe_distance(double v, double v_lead, const SafetyParams& p);

struct SpeedInterval {
  double lower = 0.0;
  double upper = 0.0;
  bool empty() const { return lower > upper; }
};

inline constexpr double kNoNeighbor = std::numeric_limits<double>::infinity();

/// Admissible speed window given the gap to a leader and a follower.
/// Pass kNoNeighbor as the gap of an absent neighbor. An empty interval
/// (lower > upper) is returned as-is; callers check `empty()`.
SpeedInterval velocity_limits(double gap_lead, double v_lead, double gap_follow, double v_follow,
                              const SafetyParams& p, double speed_limit);

}  // namespace mvplan
