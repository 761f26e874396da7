#include "mvplan/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvplan/errors.hpp"

namespace mvplan {

std::string_view to_string(Action a) {
  switch (a) {
    case Action::KS: return "KS";
    case Action::AC: return "AC";
    case Action::DC: return "DC";
    case Action::LCL: return "LCL";
    case Action::LCR: return "LCR";
    case Action::KL: return "KL";
  }
  return "?";
}

Action action_from_string(std::string_view tag) {
  for (Action a : {Action::KS, Action::AC, Action::DC, Action::LCL, Action::LCR, Action::KL}) {
    if (to_string(a) == tag) return a;
  }
  throw SchemaError("unknown action tag '" + std::string(tag) + "'");
}

std::string_view to_string(Role r) { return r == Role::Controlled ? "controlled" : "uncontrolled"; }

std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::Aggressive: return "aggressive";
    case Behavior::Normal: return "normal";
    case Behavior::Conservative: return "conservative";
  }
  return "?";
}

Role role_from_string(std::string_view s) {
  if (s == "controlled") return Role::Controlled;
  if (s == "uncontrolled") return Role::Uncontrolled;
  throw SchemaError("unknown role '" + std::string(s) + "'");
}

Behavior behavior_from_string(std::string_view s) {
  for (Behavior b : {Behavior::Aggressive, Behavior::Normal, Behavior::Conservative}) {
    if (to_string(b) == s) return b;
  }
  throw SchemaError("unknown behavior '" + std::string(s) + "'");
}

double default_gamma(Behavior b) {
  switch (b) {
    case Behavior::Aggressive: return 0.1;
    case Behavior::Normal: return 0.5;
    case Behavior::Conservative: return 0.9;
  }
  return 0.5;
}

int Road::nearest_lane(double d) const {
  const double raw = d / lane_width;
  int lane = static_cast<int>(std::floor(raw + 0.5));
  // exact half-way points go left
  if (std::abs(raw - (lane - 0.5)) < 1e-9) lane -= 1;
  return std::clamp(lane, 0, lanes - 1);
}

bool Road::lane_exists(int lane, double s) const {
  if (lane < 0 || lane >= lanes) return false;
  if (ramp && lane == ramp->merge_lane) return s <= ramp->merge_end_s;
  return true;
}

int Road::rightmost_lane(double s) const {
  return lane_exists(lanes - 1, s) ? lanes - 1 : lanes - 2;
}

LaneOccupancy lane_occupancy(const Road& road, double d, double delta_d) {
  LaneOccupancy occ;
  occ.primary = road.nearest_lane(d);
  const double off = d - road.lane_center(occ.primary);
  if (std::abs(off) > 0.5 * delta_d + 1e-9) {
    const int other = occ.primary + (off > 0.0 ? 1 : -1);
    if (other >= 0 && other < road.lanes) occ.secondary = other;
  }
  return occ;
}

const VehicleSpec& Scenario::vehicle(int id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return v;
  }
  throw UnknownVehicle("no vehicle with id " + std::to_string(id));
}

std::vector<int> Scenario::controlled_ids() const {
  std::vector<int> ids;
  for (const auto& v : vehicles) {
    if (v.controlled()) ids.push_back(v.id);
  }
  return ids;
}

DecisionState apply_action(const DecisionState& state, Action a, const ActionParams& params,
                           double speed_limit) {
  const double dt = params.dt;
  DecisionState next = state;
  switch (a) {
    case Action::KS:
      next.s += state.v * dt;
      break;
    case Action::AC: {
      const double v_raw = state.v + params.a_acc * dt;
      if (v_raw > speed_limit) {
        // accelerate until the limit, cruise afterwards
        const double t_acc = std::max(0.0, (speed_limit - state.v) / params.a_acc);
        next.s += state.v * t_acc + 0.5 * params.a_acc * t_acc * t_acc + speed_limit * (dt - t_acc);
        next.v = speed_limit;
      } else {
        next.s += state.v * dt + 0.5 * params.a_acc * dt * dt;
        next.v = v_raw;
      }
      break;
    }
    case Action::DC: {
      const double v_raw = state.v - params.a_dec * dt;
      if (v_raw < 0.0) {
        next.s += state.v * state.v / (2.0 * params.a_dec);
        next.v = 0.0;
      } else {
        next.s += state.v * dt - 0.5 * params.a_dec * dt * dt;
        next.v = v_raw;
      }
      break;
    }
    case Action::LCL:
      next.s += state.v * dt;
      next.d -= params.delta_d;
      break;
    case Action::LCR:
      next.s += state.v * dt;
      next.d += params.delta_d;
      break;
    case Action::KL:
      throw UnsupportedAction("KL is realized by the car-following prediction");
  }
  next.v = std::clamp(next.v, 0.0, speed_limit);
  return next;
}

double shortest_safe_distance(double v, double v_lead, const SafetyParams& p) {
  return std::max(0.0, v * p.tau + p.mth * std::max(v - v_lead, 0.0));
}

SpeedInterval velocity_limits(double gap_lead, double v_lead, double gap_follow, double v_follow,
                              const SafetyParams& p, double speed_limit) {
  SpeedInterval out{0.0, speed_limit};
  if (std::isfinite(gap_lead)) {
    const double headway_cap = (p.mth * v_lead + gap_lead) / (p.tau + p.mth);
    const double reaction_cap = gap_lead / p.tau;
    out.upper = std::min({headway_cap, reaction_cap, speed_limit});
  }
  if (std::isfinite(gap_follow)) {
    out.lower = std::max(0.0, v_follow - (gap_follow - p.tau * v_follow) / p.mth);
  }
  return out;
}

}  // namespace mvplan
