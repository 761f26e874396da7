#include "mvplan/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvplan/errors.hpp"

namespace mvplan {

double car_following_acceleration(double v, double v_lead, double gap, const CarFollowingParams& p) {
  if (!(gap > 0.0)) throw NonpositiveGap("car-following gap must be positive, got " + std::to_string(gap));
  const double free_term = std::pow(v / p.v0, p.delta);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    const double s_star = p.s0 + v * p.time_headway + v * (v - v_lead) / (2.0 * std::sqrt(p.a_max * p.b));
    const double ratio = std::max(s_star, 0.0) / gap;
    interaction = ratio * ratio;
  }
  const double a = p.a_max * (1.0 - free_term - interaction);
  return std::clamp(a, -p.hard_brake(), p.a_max);
}

const AgentState& TrafficSnapshot::agent(int id) const {
  for (const auto& a : agents) {
    if (a.id == id) return a;
  }
  throw UnknownVehicle("no vehicle with id " + std::to_string(id) + " in snapshot");
}

LeaderInfo find_leader(const TrafficSnapshot& snap, int ego_id, double ego_s, double ego_d, double dt_ahead) {
  const Road& road = *snap.road;
  const AgentState& ego = snap.agent(ego_id);
  const LaneOccupancy occ = lane_occupancy(road, ego_d, snap.delta_d);
  const int lane = road.nearest_lane(ego_d);
  LeaderInfo best;
  double best_s = kNoNeighbor;
  for (const auto& other : snap.agents) {
    if (other.id == ego_id) continue;
    const double s_other = other.s + other.s_dot * dt_ahead;
    if (s_other <= ego_s) continue;
    if (road.nearest_lane(other.d) != lane) continue;
    if (s_other < best_s) {
      best_s = s_other;
      best.gap = s_other - ego_s - 0.5 * (ego.geometry.length + other.geometry.length);
      best.v_lead = other.s_dot;
    }
  }
  if (road.ramp && occ.primary == road.ramp->merge_lane && occ.secondary < 0) {
    const double gap_end = road.ramp->merge_end_s - ego_s - 0.5 * ego.geometry.length;
    if (gap_end < best.gap) {
      best.gap = gap_end;
      best.v_lead = 0.0;
    }
  }
  return best;
}

CarFollowingParams car_following_for(const AgentState& agent) {
  CarFollowingParams p;
  p.v0 = agent.desired_speed;
  return p;
}

void integrate_longitudinal(double& s, double& v, double a, double dt) {
  const double v_next = v + a * dt;
  if (v_next < 0.0) {
    // stops within the tick
    if (a < 0.0) s += v * v / (-2.0 * a);
    v = 0.0;
    return;
  }
  s += 0.5 * (v + v_next) * dt;
  v = v_next;
}

namespace {

TrajectoryPoint make_point(const Road& road, double t, double s, double s_dot, double s_ddot, double d) {
  TrajectoryPoint pt;
  pt.t = t;
  pt.s = s;
  pt.s_dot = s_dot;
  pt.s_ddot = s_ddot;
  pt.d = d;
  const CartesianState c = frenet_to_cartesian(road.reference, {s, s_dot, d, 0.0});
  pt.x = c.x;
  pt.y = c.y;
  pt.v = c.v;
  pt.theta = c.theta;
  pt.kappa = road.reference.sample_at(s).kappa;
  return pt;
}

int tick_count(double horizon) { return static_cast<int>(std::lround(horizon / kPlannerTick)); }

}  // namespace

PredictedTrajectory predict_uncontrolled(int vehicle_id, const TrafficSnapshot& snap, double horizon) {
  const AgentState& self = snap.agent(vehicle_id);
  const Road& road = *snap.road;
  const CarFollowingParams params = car_following_for(self);
  const double d = road.lane_center(road.nearest_lane(self.d));

  PredictedTrajectory out;
  out.vehicle_id = vehicle_id;
  out.geometry = self.geometry;
  const int n = tick_count(horizon);
  out.points.reserve(static_cast<std::size_t>(n) + 1);

  double s = self.s;
  double v = self.s_dot;
  for (int k = 0; k <= n; ++k) {
    const double elapsed = k * kPlannerTick;
    const LeaderInfo lead = find_leader(snap, vehicle_id, s, d, elapsed);
    const double gap = std::isfinite(lead.gap) ? std::max(lead.gap, 1e-3) : kNoNeighbor;
    const double a = car_following_acceleration(v, lead.v_lead, gap, params);
    out.points.push_back(make_point(road, snap.time + elapsed, s, v, a, d));
    if (k < n) integrate_longitudinal(s, v, a, kPlannerTick);
  }
  return out;
}

PredictedTrajectory predict_controlled_peer(int vehicle_id, const std::vector<TrajectoryPoint>* last_plan,
                                            const TrafficSnapshot& snap, double horizon) {
  if (last_plan == nullptr || last_plan->empty()) return predict_uncontrolled(vehicle_id, snap, horizon);
  const AgentState& self = snap.agent(vehicle_id);
  const Road& road = *snap.road;
  PredictedTrajectory out;
  out.vehicle_id = vehicle_id;
  out.geometry = self.geometry;
  const int n = tick_count(horizon);
  const auto& plan = *last_plan;
  const auto first = static_cast<long>(std::lround((snap.time - plan.front().t) / kPlannerTick));
  if (first < 0 || first >= static_cast<long>(plan.size())) return predict_uncontrolled(vehicle_id, snap, horizon);
  for (int k = 0; k <= n; ++k) {
    const long idx = first + k;
    if (idx < static_cast<long>(plan.size())) {
      TrajectoryPoint pt = plan[static_cast<std::size_t>(idx)];
      out.points.push_back(pt);
      continue;
    }
    const TrajectoryPoint& last = out.points.back();
    const double s = last.s + last.s_dot * kPlannerTick;
    out.points.push_back(make_point(road, last.t + kPlannerTick, s, last.s_dot, 0.0, last.d));
  }
  return out;
}

}  // namespace mvplan
