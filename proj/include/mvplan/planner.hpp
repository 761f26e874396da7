#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mvplan/geometry.hpp"
#include "mvplan/model.hpp"
#include "mvplan/prediction.hpp"
#include "mvplan/scenario_io.hpp"

namespace mvplan {

inline constexpr double kDefaultObstacleConstant = 10.0;

struct TargetStateRegion {
  double speed_lo = 0.0;
  double speed_hi = 0.0;
  double d_lo = 0.0;
  double d_hi = 0.0;
  double duration = 1.5;
  int speed_samples = 5;
  int lateral_samples = 3;
};

struct KinematicLimits {
  double max_curvature = 0.2;
  double max_accel = 4.0;
  double max_speed = 16.7 * 1.1;

  static KinematicLimits for_road(const Road& road);
};

/// Frenet kinematic state with accelerations, the planner's boundary condition.
struct PlanStart {
  double s = 0.0;
  double s_dot = 0.0;
  double s_ddot = 0.0;
  double d = 0.0;
  double d_dot = 0.0;
  double d_ddot = 0.0;
};

struct SubTrajectory {
  QuinticPolynomial lon;
  QuinticPolynomial lat;
  std::vector<TrajectoryPoint> points;
  double cost = 0.0;
  bool feasible = false;
  std::string reason;  ///< first violated constraint when infeasible
};

/// Body-frame alert rectangle of one vehicle against one other vehicle.
struct AlertZone {
  double front = 0.0;       ///< D_s ahead of the front bumper
  double rear = 0.0;        ///< 1.5 l behind the rear bumper
  double half_width = 0.0;  ///< lateral reach beyond each body side (0.75 w)
};

AlertZone alert_zone(const VehicleGeometry& g, double v_self, double v_other, const SafetyParams& safety);

/// Pose of a rectangular body.
struct BodyPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  VehicleGeometry geometry;
};

bool rectangles_overlap(const BodyPose& a, const BodyPose& b);
/// Euclidean distance between two rectangles (0 when they touch or overlap).
double rectangle_distance(const BodyPose& a, const BodyPose& b);
/// Per-axis separation of `other` from `self`, in the body frame of `self`,
/// clamped at 0 where the projections overlap.
std::array<double, 2> body_frame_gap(const BodyPose& self, const BodyPose& other);

/// Per-tick, per-vehicle obstacle term: 0 outside the alert zone, +inf on
/// overlap, C_z (2 - Dx/(D_s + 1.5 l) - Dy/(1.5 w)) inside.
double obstacle_term(const BodyPose& self, double v_self, const BodyPose& other, double v_other,
                     const SafetyParams& safety, double c_z);

/// Region of end states for one action segment. `nominal_d` overrides the
/// lateral center (the decision layer's step-end offset); otherwise it is the
/// nearest lane center, shifted by delta_d for lane changes and snapped to
/// the delta_d grid. The nominal speed is clamped to [0, max speed] first.
/// Throws RegionEmpty when clipping leaves nothing.
TargetStateRegion target_region_for(Action action, const PlanStart& start, const Road& road,
                                    const ActionParams& params, const KinematicLimits& limits, double duration,
                                    std::optional<double> nominal_d = std::nullopt);

/// Uniform grid over a region; end accelerations and lateral rate are 0.
std::vector<PlanStart> sample_targets(const TargetStateRegion& region);

/// Quintic pair from `start` to `target` over `duration`, sampled at 0.1 s
/// starting at absolute time `t0`. End s = start s + mean speed * duration.
SubTrajectory generate_subtrajectory(const PlanStart& start, const PlanStart& target, double duration, double t0,
                                     const ReferencePath& path);

/// Sum of obstacle terms over ticks and predicted vehicles (+inf on overlap).
double obstacle_cost(const SubTrajectory& traj, const VehicleGeometry& self,
                     const std::vector<PredictedTrajectory>& predictions, const SafetyParams& safety,
                     double c_z = kDefaultObstacleConstant);

/// Weighted comfort, alignment, lane-keeping and obstacle cost.
double trajectory_cost(const SubTrajectory& traj, const WeightVector& weights, const Road& road, Action action,
                       const VehicleGeometry& self, const std::vector<PredictedTrajectory>& predictions,
                       const SafetyParams& safety, double c_z = kDefaultObstacleConstant);

struct Verdict {
  bool feasible = true;
  std::string reason;
};

Verdict check_feasible(const SubTrajectory& traj, const KinematicLimits& limits, const Road& road,
                       const VehicleGeometry& self, const std::vector<PredictedTrajectory>& predictions);

struct PlanSegment {
  Action action = Action::KS;
  double duration = 1.5;
  std::optional<double> nominal_d;
};

struct PlanRequest {
  int vehicle_id = 0;
  VehicleGeometry geometry;
  PlanStart start;
  double t0 = 0.0;
  std::vector<PlanSegment> segments;
  const Road* road = nullptr;
  ActionParams actions;
  SafetyParams safety;
  WeightVector weights;
  KinematicLimits limits;
  double c_z = kDefaultObstacleConstant;
  std::vector<PredictedTrajectory> predictions;  ///< other vehicles, from t0 at 0.1 s
};

struct PlanResult {
  std::vector<TrajectoryPoint> points;  ///< concatenated samples, t0 first
  std::vector<SubTrajectory> segments;  ///< selected candidate per segment
  double cost = 0.0;
  std::optional<int> failed_segment;    ///< set on PlanFailure

  bool ok() const { return !failed_segment.has_value(); }
};

/// Per segment: region, samples, candidates, feasibility, minimum cost.
/// Each selected end state seeds the next segment.
PlanResult plan(const PlanRequest& request);

/// Every candidate of one segment, scored and checked; used by `plan` and by
/// optimality replays.
std::vector<SubTrajectory> segment_candidates(const PlanRequest& request, const PlanStart& start,
                                              const PlanSegment& segment, double t0);

/// Maximum-deceleration stop while settling laterally on `target_d`.
std::vector<TrajectoryPoint> emergency_trajectory(const PlanStart& start, double t0, const Road& road,
                                                  double decel, double horizon, double target_d);

}  // namespace mvplan
