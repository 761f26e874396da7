#include "mvplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvplan/errors.hpp"

namespace mvplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::array<Point2, 4> corners(const BodyPose& p) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  const double hl = 0.5 * p.geometry.length, hw = 0.5 * p.geometry.width;
  std::array<Point2, 4> out;
  const double sx[4] = {hl, hl, -hl, -hl};
  const double sy[4] = {hw, -hw, -hw, hw};
  for (int i = 0; i < 4; ++i) out[i] = {p.x + sx[i] * c - sy[i] * s, p.y + sx[i] * s + sy[i] * c};
  return out;
}

// projected extents of `other` along the body axes of `self`, relative to self's center
struct Extents {
  double x_lo, x_hi, y_lo, y_hi;
};

Extents project(const BodyPose& self, const BodyPose& other) {
  const double c = std::cos(self.theta), s = std::sin(self.theta);
  Extents e{kInf, -kInf, kInf, -kInf};
  for (const auto& q : corners(other)) {
    const double dx = q.x - self.x, dy = q.y - self.y;
    const double px = dx * c + dy * s;
    const double py = -dx * s + dy * c;
    e.x_lo = std::min(e.x_lo, px);
    e.x_hi = std::max(e.x_hi, px);
    e.y_lo = std::min(e.y_lo, py);
    e.y_hi = std::max(e.y_hi, py);
  }
  return e;
}

double point_segment(const Point2& p, const Point2& a, const Point2& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

BodyPose pose_of(const TrajectoryPoint& p, const VehicleGeometry& g) { return {p.x, p.y, p.theta, g}; }

// prediction sample matched to absolute time t (clamped to the last sample)
const TrajectoryPoint* matched(const PredictedTrajectory& pred, double t) {
  if (pred.points.empty()) return nullptr;
  const long idx = std::lround((t - pred.points.front().t) / kPlannerTick);
  if (idx < 0) return nullptr;
  return &pred.points[std::min<std::size_t>(static_cast<std::size_t>(idx), pred.points.size() - 1)];
}

double lane_out(const Road& road, double d) { return d - road.lane_center(road.nearest_lane(d)); }

}  // namespace

KinematicLimits KinematicLimits::for_road(const Road& road) {
  KinematicLimits l;
  l.max_speed = 1.1 * road.speed_limit;
  return l;
}

AlertZone alert_zone(const VehicleGeometry& g, double v_self, double v_other, const SafetyParams& safety) {
  return {shortest_safe_distance(v_self, v_other, safety), 1.5 * g.length, 0.75 * g.width};
}

bool rectangles_overlap(const BodyPose& a, const BodyPose& b) {
  // separating axes: the body axes of both rectangles
  const Extents ab = project(a, b);
  if (ab.x_lo >= 0.5 * a.geometry.length || ab.x_hi <= -0.5 * a.geometry.length) return false;
  if (ab.y_lo >= 0.5 * a.geometry.width || ab.y_hi <= -0.5 * a.geometry.width) return false;
  const Extents ba = project(b, a);
  if (ba.x_lo >= 0.5 * b.geometry.length || ba.x_hi <= -0.5 * b.geometry.length) return false;
  if (ba.y_lo >= 0.5 * b.geometry.width || ba.y_hi <= -0.5 * b.geometry.width) return false;
  return true;
}

double rectangle_distance(const BodyPose& a, const BodyPose& b) {
  if (rectangles_overlap(a, b)) return 0.0;
  const auto ca = corners(a), cb = corners(b);
  double best = kInf;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, point_segment(ca[i], cb[j], cb[(j + 1) % 4]));
      best = std::min(best, point_segment(cb[i], ca[j], ca[(j + 1) % 4]));
    }
  }
  return best;
}

std::array<double, 2> body_frame_gap(const BodyPose& self, const BodyPose& other) {
  const Extents e = project(self, other);
  const double hl = 0.5 * self.geometry.length, hw = 0.5 * self.geometry.width;
  return {std::max({0.0, e.x_lo - hl, -hl - e.x_hi}), std::max({0.0, e.y_lo - hw, -hw - e.y_hi})};
}

double obstacle_term(const BodyPose& self, double v_self, const BodyPose& other, double v_other,
                     const SafetyParams& safety, double c_z) {
  if (rectangles_overlap(self, other)) return kInf;
  const Extents e = project(self, other);
  const double hl = 0.5 * self.geometry.length, hw = 0.5 * self.geometry.width;
  const double dx = std::max({0.0, e.x_lo - hl, -hl - e.x_hi});
  const double dy = std::max({0.0, e.y_lo - hw, -hw - e.y_hi});
  const AlertZone zone = alert_zone(self.geometry, v_self, v_other, safety);
  const bool ahead = e.x_lo > hl;
  const bool behind = e.x_hi < -hl;
  if (ahead && dx > zone.front) return 0.0;
  if (behind && dx > zone.rear) return 0.0;
  if (dy > zone.half_width) return 0.0;
  return c_z * (2.0 - dx / (zone.front + zone.rear) - dy / (1.5 * self.geometry.width));
}

TargetStateRegion target_region_for(Action action, const PlanStart& start, const Road& road,
                                    const ActionParams& params, const KinematicLimits& limits, double duration,
                                    std::optional<double> nominal_d) {
  if (!(duration > 0.0)) throw NonpositiveDuration("segment duration must be positive");
  TargetStateRegion r;
  r.duration = duration;
  const double v = start.s_dot;
  const double center = road.lane_center(road.nearest_lane(start.d));
  double v_mid = v, v_half = 0.5, d_mid = center, d_half = 0.2;
  switch (action) {
    case Action::KS: break;
    case Action::AC: v_mid = v + params.a_acc * duration; break;
    case Action::DC: v_mid = v - params.a_dec * duration; break;
    case Action::LCL:
    case Action::LCR: {
      // snapped to the partial-change grid so chained changes do not drift
      const double raw = start.d + (action == Action::LCL ? -params.delta_d : params.delta_d);
      d_mid = center + params.delta_d * std::round((raw - center) / params.delta_d);
      d_half = 0.3;
      break;
    }
    case Action::KL:
      v_half = 1.5;
      d_half = 0.4;
      break;
  }
  if (nominal_d && action != Action::KL) d_mid = *nominal_d;
  v_mid = std::clamp(v_mid, 0.0, limits.max_speed);
  r.speed_lo = std::max(0.0, v_mid - v_half);
  r.speed_hi = std::min(limits.max_speed, v_mid + v_half);
  const double road_lo = road.lane_center(0) - 0.5 * road.lane_width;
  const double road_hi = road.lane_center(road.lanes - 1) + 0.5 * road.lane_width;
  r.d_lo = std::max(road_lo, d_mid - d_half);
  r.d_hi = std::min(road_hi, d_mid + d_half);
  if (r.speed_lo > r.speed_hi || r.d_lo > r.d_hi) throw RegionEmpty("target region empty after clipping");
  return r;
}

std::vector<PlanStart> sample_targets(const TargetStateRegion& region) {
  auto grid = [](double lo, double hi, int n) {
    std::vector<double> out;
    if (n <= 1) {
      out.push_back(0.5 * (lo + hi));
      return out;
    }
    for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
    return out;
  };
  std::vector<PlanStart> out;
  for (double v : grid(region.speed_lo, region.speed_hi, region.speed_samples)) {
    for (double d : grid(region.d_lo, region.d_hi, region.lateral_samples)) {
      PlanStart t;
      t.s_dot = v;
      t.d = d;
      out.push_back(t);
    }
  }
  return out;
}

SubTrajectory generate_subtrajectory(const PlanStart& start, const PlanStart& target, double duration, double t0,
                                     const ReferencePath& path) {
  SubTrajectory traj;
  const double s_end = start.s + 0.5 * (start.s_dot + target.s_dot) * duration;
  traj.lon = fit_quintic({start.s, start.s_dot, start.s_ddot}, {s_end, target.s_dot, 0.0}, duration);
  traj.lat = fit_quintic({start.d, start.d_dot, start.d_ddot}, {target.d, 0.0, 0.0}, duration);
  const int n = static_cast<int>(std::floor(duration / kPlannerTick + 1e-9));
  traj.points.reserve(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = std::min(k * kPlannerTick, duration);
    const QuinticEval lon = eval_quintic(traj.lon, t);
    const QuinticEval lat = eval_quintic(traj.lat, t);
    TrajectoryPoint p;
    p.t = t0 + t;
    p.s = lon.p;
    p.s_dot = lon.p_dot;
    p.s_ddot = lon.p_ddot;
    p.s_dddot = lon.p_dddot;
    p.d = lat.p;
    p.d_dot = lat.p_dot;
    p.d_ddot = lat.p_ddot;
    const CartesianState c = frenet_to_cartesian(path, {p.s, p.s_dot, p.d, p.d_dot});
    p.x = c.x;
    p.y = c.y;
    p.v = c.v;
    p.theta = c.theta;
    traj.points.push_back(p);
  }
  // curvature: heading change over travelled arclength
  auto& pts = traj.points;
  const std::size_t m = pts.size();
  for (std::size_t k = 0; k < m && m > 1; ++k) {
    const std::size_t a = k == 0 ? 0 : k - 1;
    const std::size_t b = k + 1 == m ? m - 1 : k + 1;
    double arc = 0.0;
    for (std::size_t i = a; i < b; ++i) arc += std::hypot(pts[i + 1].x - pts[i].x, pts[i + 1].y - pts[i].y);
    pts[k].kappa = arc > 1e-6 ? normalize_angle(pts[b].theta - pts[a].theta) / arc : 0.0;
  }
  return traj;
}

double obstacle_cost(const SubTrajectory& traj, const VehicleGeometry& self,
                     const std::vector<PredictedTrajectory>& predictions, const SafetyParams& safety, double c_z) {
  double total = 0.0;
  for (const auto& p : traj.points) {
    const BodyPose ego = pose_of(p, self);
    for (const auto& pred : predictions) {
      const TrajectoryPoint* q = matched(pred, p.t);
      if (q == nullptr) continue;
      total += obstacle_term(ego, p.v, pose_of(*q, pred.geometry), q->v, safety, c_z);
      if (std::isinf(total)) return total;
    }
  }
  return total;
}

double trajectory_cost(const SubTrajectory& traj, const WeightVector& w, const Road& road, Action action,
                       const VehicleGeometry& self, const std::vector<PredictedTrajectory>& predictions,
                       const SafetyParams& safety, double c_z) {
  double cur = 0.0, phi = 0.0, out = 0.0, acc = 0.0, jerk = 0.0;
  const bool gate_out = !is_lane_change(action);
  for (const auto& p : traj.points) {
    cur += p.kappa * p.kappa;
    const double dphi = normalize_angle(p.theta - road.reference.sample_at(p.s).theta);
    phi += dphi * dphi;
    if (gate_out) {
      const double o = lane_out(road, p.d);
      out += o * o;
    }
    acc += p.s_ddot * p.s_ddot;
    jerk += p.s_dddot * p.s_dddot;
  }
  double total = w.w_cur * cur + w.w_phi * phi + w.w_out * out + w.w_acc * acc + w.w_jerk * jerk;
  if (w.w_obs > 0.0) total += w.w_obs * obstacle_cost(traj, self, predictions, safety, c_z);
  return total;
}

Verdict check_feasible(const SubTrajectory& traj, const KinematicLimits& limits, const Road& road,
                       const VehicleGeometry& self, const std::vector<PredictedTrajectory>& predictions) {
  constexpr double tol = 1e-9;
  const double d_lo = road.lane_center(0) - 0.5 * road.lane_width + 0.5 * self.width;
  for (const auto& p : traj.points) {
    if (std::abs(p.kappa) > limits.max_curvature + tol) return {false, "curvature"};
    if (std::abs(p.s_ddot) > limits.max_accel + tol) return {false, "acceleration"};
    if (p.s_dot < -tol || p.v > limits.max_speed + tol) return {false, "speed"};
    const int right = road.rightmost_lane(p.s + 0.5 * self.length);
    const double d_hi = road.lane_center(right) + 0.5 * road.lane_width - 0.5 * self.width;
    if (p.d < d_lo - tol || p.d > d_hi + tol) return {false, "road bounds"};
  }
  for (const auto& p : traj.points) {
    const BodyPose ego = pose_of(p, self);
    for (const auto& pred : predictions) {
      const TrajectoryPoint* q = matched(pred, p.t);
      if (q != nullptr && rectangles_overlap(ego, pose_of(*q, pred.geometry))) return {false, "collision"};
    }
  }
  return {};
}

std::vector<SubTrajectory> segment_candidates(const PlanRequest& req, const PlanStart& start,
                                              const PlanSegment& segment, double t0) {
  const Road& road = *req.road;
  const TargetStateRegion region =
      target_region_for(segment.action, start, road, req.actions, req.limits, segment.duration, segment.nominal_d);
  std::vector<SubTrajectory> out;
  for (const auto& target : sample_targets(region)) {
    SubTrajectory traj;
    try {
      traj = generate_subtrajectory(start, target, segment.duration, t0, road.reference);
    } catch (const Error& e) {
      traj.feasible = false;
      traj.reason = e.what();
      traj.cost = kInf;
      out.push_back(std::move(traj));
      continue;
    }
    const Verdict v = check_feasible(traj, req.limits, road, req.geometry, req.predictions);
    traj.feasible = v.feasible;
    traj.reason = v.reason;
    traj.cost = trajectory_cost(traj, req.weights, road, segment.action, req.geometry, req.predictions, req.safety,
                                req.c_z);
    if (std::isinf(traj.cost)) {
      traj.feasible = false;
      if (traj.reason.empty()) traj.reason = "collision";
    }
    out.push_back(std::move(traj));
  }
  return out;
}

PlanResult plan(const PlanRequest& req) {
  if (req.segments.empty()) throw InvariantViolation("plan needs at least one action segment");
  PlanResult result;
  PlanStart start = req.start;
  double t = req.t0;
  for (std::size_t i = 0; i < req.segments.size(); ++i) {
    const PlanSegment& seg = req.segments[i];
    std::vector<SubTrajectory> cands;
    try {
      cands = segment_candidates(req, start, seg, t);
    } catch (const RegionEmpty&) {
      result.failed_segment = static_cast<int>(i);
      return result;
    }
    int best = -1;
    for (std::size_t c = 0; c < cands.size(); ++c) {
      if (!cands[c].feasible) continue;
      if (best < 0 || cands[c].cost < cands[static_cast<std::size_t>(best)].cost) best = static_cast<int>(c);
    }
    if (best < 0) {
      result.failed_segment = static_cast<int>(i);
      return result;
    }
    SubTrajectory& chosen = cands[static_cast<std::size_t>(best)];
    const auto& pts = chosen.points;
    result.points.insert(result.points.end(), pts.begin() + (result.points.empty() ? 0 : 1), pts.end());
    result.cost += chosen.cost;
    const QuinticEval lon = eval_quintic(chosen.lon, seg.duration);
    const QuinticEval lat = eval_quintic(chosen.lat, seg.duration);
    start = {lon.p, lon.p_dot, lon.p_ddot, lat.p, lat.p_dot, lat.p_ddot};
    t += seg.duration;
    result.segments.push_back(std::move(chosen));
  }
  return result;
}

std::vector<TrajectoryPoint> emergency_trajectory(const PlanStart& start, double t0, const Road& road,
                                                  double decel, double horizon, double target_d) {
  const double settle = 1.5;
  const QuinticPolynomial lat = fit_quintic({start.d, start.d_dot, start.d_ddot}, {target_d, 0.0, 0.0}, settle);
  const int n = static_cast<int>(std::lround(horizon / kPlannerTick));
  std::vector<TrajectoryPoint> out;
  double s = start.s, v = std::max(0.0, start.s_dot);
  for (int k = 0; k <= n; ++k) {
    const double t = k * kPlannerTick;
    TrajectoryPoint p;
    p.t = t0 + t;
    p.s = s;
    p.s_dot = v;
    p.s_ddot = v > 0.0 ? -decel : 0.0;
    if (t < settle) {
      const QuinticEval e = eval_quintic(lat, t);
      p.d = e.p;
      p.d_dot = e.p_dot;
      p.d_ddot = e.p_ddot;
    } else {
      p.d = target_d;
    }
    if (v <= 0.0) p.d_dot = 0.0;
    const CartesianState c = frenet_to_cartesian(road.reference, {p.s, p.s_dot, p.d, p.d_dot});
    p.x = c.x;
    p.y = c.y;
    p.v = c.v;
    p.theta = c.theta;
    out.push_back(p);
    integrate_longitudinal(s, v, -decel, kPlannerTick);
  }
  return out;
}

}  // namespace mvplan
