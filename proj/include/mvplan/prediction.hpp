#pragma once

#include <optional>
#include <vector>

#include "mvplan/model.hpp"

namespace mvplan {

inline constexpr double kPlannerTick = 0.1;

/// Intelligent-driver-model parameters.
struct CarFollowingParams {
  double v0 = 16.7;
  double a_max = 1.5;
  double b = 2.0;
  double s0 = 2.0;
  double time_headway = 1.5;
  double delta = 4.0;

  double hard_brake() const { return 2.0 * b; }
};

/// a = a_max (1 - (v/v0)^delta - (s*/gap)^2),
/// s* = s0 + v T + v (v - v_lead) / (2 sqrt(a_max b)), clamped to [-2b, a_max].
/// gap = kNoNeighbor means no leader. Throws NonpositiveGap for gap <= 0.
double car_following_acceleration(double v, double v_lead, double gap, const CarFollowingParams& p);

/// One sample of a planned or predicted motion, absolute time stamped.
struct TrajectoryPoint {
  double t = 0.0;
  double s = 0.0;
  double s_dot = 0.0;
  double s_ddot = 0.0;
  double s_dddot = 0.0;
  double d = 0.0;
  double d_dot = 0.0;
  double d_ddot = 0.0;
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double theta = 0.0;
  double kappa = 0.0;
};

struct PredictedTrajectory {
  int vehicle_id = 0;
  VehicleGeometry geometry;
  std::vector<TrajectoryPoint> points;  ///< fixed 0.1 s tick from the snapshot time
};

/// Kinematic state of one vehicle in a frozen snapshot.
struct AgentState {
  int id = 0;
  VehicleGeometry geometry;
  bool controlled = false;
  double s = 0.0;
  double s_dot = 0.0;
  double s_ddot = 0.0;
  double d = 0.0;
  double d_dot = 0.0;
  double desired_speed = 16.7;
};

struct TrafficSnapshot {
  const Road* road = nullptr;
  double delta_d = 1.75;
  double time = 0.0;
  std::vector<AgentState> agents;  ///< sorted by id

  const AgentState& agent(int id) const;  ///< throws UnknownVehicle
};

struct LeaderInfo {
  double gap = kNoNeighbor;
  double v_lead = 0.0;
};

/// Closest vehicle ahead of `ego` whose nearest lane is `ego`'s nearest lane
/// (vehicles still crossing in are not leaders yet), with every other
/// agent extrapolated at constant speed over `dt_ahead` seconds. The merge
/// lane end acts as a stopped obstacle.
LeaderInfo find_leader(const TrafficSnapshot& snap, int ego_id, double ego_s, double ego_d, double dt_ahead);

CarFollowingParams car_following_for(const AgentState& agent);

/// Advances a speed/position pair one tick under acceleration `a` (no reversing).
void integrate_longitudinal(double& s, double& v, double a, double dt);

/// KL prediction: lane pinned to its center, longitudinal motion integrated
/// at the 0.1 s tick against the frozen-kinematics leader.
/// `horizon` seconds -> round(horizon / 0.1) samples after the initial one.
PredictedTrajectory predict_uncontrolled(int vehicle_id, const TrafficSnapshot& snap, double horizon);

/// The peer's last published plan re-cut to [snap.time, snap.time + horizon],
/// extended at constant speed along its last lateral offset. Without a plan
/// (`last_plan` empty) the KL prediction is returned.
PredictedTrajectory predict_controlled_peer(int vehicle_id, const std::vector<TrajectoryPoint>* last_plan,
                                            const TrafficSnapshot& snap, double horizon);

}  // namespace mvplan
