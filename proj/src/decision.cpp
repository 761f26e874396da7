#include "mvplan/decision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "mvplan/errors.hpp"
#include "mvplan/prediction.hpp"

namespace mvplan {

namespace {

constexpr double kEps = 1e-9;

using LaneMask = std::uint32_t;

LaneMask mask_of(const LaneOccupancy& o) {
  LaneMask m = 1u << o.primary;
  if (o.secondary >= 0) m |= 1u << o.secondary;
  return m;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(tag * 0x100000001B3ull + index)));
}

// Unbiased index in [0, n) that does not depend on the standard library's distributions.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return static_cast<std::size_t>(r % bound);
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

constexpr std::uint64_t kTagNode = 1;
constexpr std::uint64_t kTagRollout = 2;

}  // namespace

std::vector<std::size_t> FlowState::controlled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (vehicles[i].controlled) out.push_back(i);
  }
  return out;
}

const FlowVehicle& FlowState::vehicle(int id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return v;
  }
  throw UnknownVehicle("no vehicle with id " + std::to_string(id));
}

bool FlowModel::in_lane(double d, int lane) const {
  return std::abs(d - road->lane_center(lane)) <= 0.5 * actions.delta_d + kEps;
}

DecisionState FlowModel::advance_uncontrolled(const FlowState& flow, std::size_t index) const {
  const FlowVehicle& self = flow.vehicles[index];
  const double d = road->lane_center(road->nearest_lane(self.state.d));
  TrafficSnapshot snap;
  snap.road = road;
  snap.delta_d = actions.delta_d;
  snap.agents.reserve(flow.vehicles.size());
  for (const auto& v : flow.vehicles) {
    AgentState a;
    a.id = v.id;
    a.geometry = v.geometry;
    a.controlled = v.controlled;
    a.s = v.state.s;
    a.s_dot = v.state.v;
    a.d = v.state.d;
    a.desired_speed = v.desired_speed;
    snap.agents.push_back(a);
  }
  const CarFollowingParams params = car_following_for(snap.agents[index]);
  const int n = static_cast<int>(std::lround(actions.dt / kPlannerTick));
  double s = self.state.s;
  double v = self.state.v;
  for (int k = 0; k < n; ++k) {
    const LeaderInfo lead = find_leader(snap, self.id, s, d, k * kPlannerTick);
    const double gap = std::isfinite(lead.gap) ? std::max(lead.gap, 1e-3) : kNoNeighbor;
    integrate_longitudinal(s, v, car_following_acceleration(v, lead.v_lead, gap, params), kPlannerTick);
  }
  return {s, d, v};
}

std::vector<DecisionState> FlowModel::one_step_predictions(const FlowState& flow) const {
  std::vector<DecisionState> out(flow.vehicles.size());
  for (std::size_t i = 0; i < flow.vehicles.size(); ++i) {
    const FlowVehicle& v = flow.vehicles[i];
    out[i] = v.controlled ? apply_action(v.state, Action::KS, actions, speed_limit()) : advance_uncontrolled(flow, i);
  }
  return out;
}

std::vector<Action> FlowModel::valid_actions(const FlowState& flow, std::size_t index,
                                             const std::vector<DecisionState>& predicted) const {
  const FlowVehicle& self = flow.vehicles[index];
  const double half_len = 0.5 * self.geometry.length;
  const LaneOccupancy occ0 = lane_occupancy(*road, self.state.d, actions.delta_d);

  // rightmost reachable lane: the merge lane only for vehicles already on it
  int max_lane = road->lanes - 1;
  if (road->ramp && !occ0.covers(road->ramp->merge_lane)) max_lane = road->ramp->merge_lane - 1;

  std::vector<Action> out;
  for (Action a : kControlledActions) {
    const DecisionState next = apply_action(self.state, a, actions, speed_limit());
    if (next.d < road->lane_center(0) - kEps || next.d > road->lane_center(max_lane) + kEps) continue;
    const LaneOccupancy occ1 = lane_occupancy(*road, next.d, actions.delta_d);
    if (road->ramp && occ1.covers(road->ramp->merge_lane) && next.s + half_len > road->ramp->merge_end_s) continue;

    const LaneMask lanes = mask_of(occ0) | mask_of(occ1);
    double gap_lead = kNoNeighbor, v_lead = 0.0, gap_follow = kNoNeighbor, v_follow = 0.0;
    double lead_s = kNoNeighbor, follow_s = -kNoNeighbor;
    for (std::size_t j = 0; j < flow.vehicles.size(); ++j) {
      if (j == index) continue;
      const DecisionState& o = predicted[j];
      if ((mask_of(lane_occupancy(*road, o.d, actions.delta_d)) & lanes) == 0) continue;
      // leader/follower by the current order; a flipped order shows up as a negative gap
      const bool ahead = flow.vehicles[j].state.s >= self.state.s;
      const double half_sum = 0.5 * (self.geometry.length + flow.vehicles[j].geometry.length);
      const double gap = (ahead ? o.s - next.s : next.s - o.s) - half_sum;
      if (ahead) {
        if (o.s < lead_s) {
          lead_s = o.s;
          gap_lead = gap;
          v_lead = o.v;
        }
      } else if (o.s > follow_s) {
        follow_s = o.s;
        gap_follow = gap;
        v_follow = o.v;
      }
    }
    if (road->ramp && occ1.covers(road->ramp->merge_lane)) {
      const double gap_end = road->ramp->merge_end_s - next.s - half_len;
      if (gap_end < gap_lead) {
        gap_lead = gap_end;
        v_lead = 0.0;
      }
    }
    if (gap_lead < 0.0 || gap_follow < 0.0) continue;
    const SpeedInterval iv = velocity_limits(gap_lead, v_lead, gap_follow, v_follow, safety, speed_limit());
    if (iv.empty()) continue;
    if (next.v < iv.lower - kEps || next.v > iv.upper + kEps) continue;
    out.push_back(a);
  }
  if (out.empty()) out.push_back(Action::DC);
  return out;
}

std::vector<Action> FlowModel::enumerate_vehicle_actions(const FlowState& flow, int vehicle_id) const {
  for (std::size_t i = 0; i < flow.vehicles.size(); ++i) {
    if (flow.vehicles[i].id != vehicle_id) continue;
    if (!flow.vehicles[i].controlled) {
      throw UnsupportedAction("vehicle " + std::to_string(vehicle_id) + " is not controlled");
    }
    return valid_actions(flow, i, one_step_predictions(flow));
  }
  throw UnknownVehicle("no vehicle with id " + std::to_string(vehicle_id));
}

std::vector<std::vector<Action>> FlowModel::action_sets(const FlowState& flow) const {
  const auto predicted = one_step_predictions(flow);
  std::vector<std::vector<Action>> out;
  for (std::size_t i : flow.controlled_indices()) out.push_back(valid_actions(flow, i, predicted));
  return out;
}

bool FlowModel::overlaps(const FlowVehicle& a, const DecisionState& sa, const FlowVehicle& b,
                         const DecisionState& sb) {
  return std::abs(sa.s - sb.s) < 0.5 * (a.geometry.length + b.geometry.length) &&
         std::abs(sa.d - sb.d) < 0.5 * (a.geometry.width + b.geometry.width);
}

bool FlowModel::following_safe(const FlowVehicle& a, const DecisionState& sa, const FlowVehicle& b,
                               const DecisionState& sb) const {
  const LaneOccupancy oa = lane_occupancy(*road, sa.d, actions.delta_d);
  const LaneOccupancy ob = lane_occupancy(*road, sb.d, actions.delta_d);
  if (!oa.intersects(ob)) return true;
  const bool a_rear = sa.s < sb.s;
  const DecisionState& rear = a_rear ? sa : sb;
  const DecisionState& front = a_rear ? sb : sa;
  const double gap = front.s - rear.s - 0.5 * (a.geometry.length + b.geometry.length);
  const double needed = std::max(safety.tau * rear.v, (safety.tau + safety.mth) * rear.v - safety.mth * front.v);
  return gap >= needed - kEps;
}

bool FlowModel::transition_conflict(const FlowVehicle& a, const DecisionState& a_next, const FlowVehicle& b,
                                    const DecisionState& b_next) const {
  const LaneMask a0 = mask_of(lane_occupancy(*road, a.state.d, actions.delta_d));
  const LaneMask a1 = mask_of(lane_occupancy(*road, a_next.d, actions.delta_d));
  const LaneMask b0 = mask_of(lane_occupancy(*road, b.state.d, actions.delta_d));
  const LaneMask b1 = mask_of(lane_occupancy(*road, b_next.d, actions.delta_d));
  const LaneMask enter_a = a1 & ~a0;
  const LaneMask enter_b = b1 & ~b0;
  if ((enter_a & (b0 | b1)) == 0 && (enter_b & (a0 | a1)) == 0) return false;

  const double half = 0.5 * (a.geometry.length + b.geometry.length);
  // swap: each enters a lane the other starts in while their swept extents meet
  if ((enter_a & b0) != 0 && (enter_b & a0) != 0) {
    const bool a_rear = a.state.s <= b.state.s;
    const double pad = a_rear ? shortest_safe_distance(std::max(a.state.v, a_next.v), std::min(b.state.v, b_next.v), safety)
                              : shortest_safe_distance(std::max(b.state.v, b_next.v), std::min(a.state.v, a_next.v), safety);
    const double a_lo = std::min(a.state.s, a_next.s), a_hi = std::max(a.state.s, a_next.s);
    const double b_lo = std::min(b.state.s, b_next.s), b_hi = std::max(b.state.s, b_next.s);
    const double a_pad = a_rear ? pad : 0.0;
    const double b_pad = a_rear ? 0.0 : pad;
    if (a_lo - half < b_hi + b_pad && b_lo - half < a_hi + a_pad) return true;
  }
  for (double f : {0.0, 0.5, 1.0}) {
    const double sa = a.state.s + f * (a_next.s - a.state.s);
    const double sb = b.state.s + f * (b_next.s - b.state.s);
    const double va = a.state.v + f * (a_next.v - a.state.v);
    const double vb = b.state.v + f * (b_next.v - b.state.v);
    const bool a_rear = sa < sb;
    const double gap = std::abs(sb - sa) - half;
    const double need = a_rear ? shortest_safe_distance(va, vb, safety) : shortest_safe_distance(vb, va, safety);
    if (gap < need - kEps) return true;
  }
  return false;
}

bool FlowModel::pair_admissible(const FlowVehicle& a, const DecisionState& a_next, const FlowVehicle& b,
                                const DecisionState& b_next) const {
  if (overlaps(a, a_next, b, b_next)) return false;
  // passing through each other inside a shared lane
  const bool shared_before = lane_occupancy(*road, a.state.d, actions.delta_d).intersects(lane_occupancy(*road, b.state.d, actions.delta_d));
  const bool shared_after = lane_occupancy(*road, a_next.d, actions.delta_d).intersects(lane_occupancy(*road, b_next.d, actions.delta_d));
  if (shared_before && shared_after && (a.state.s < b.state.s) != (a_next.s < b_next.s)) return false;
  // a following check only binds a controlled rear vehicle
  const bool a_rear = a_next.s < b_next.s;
  const FlowVehicle& rear = a_rear ? a : b;
  if (rear.controlled && !following_safe(a, a_next, b, b_next)) return false;
  return !transition_conflict(a, a_next, b, b_next);
}

FlowState FlowModel::successor(const FlowState& flow, const JointAction& joint) const {
  const auto ctrl = flow.controlled_indices();
  if (joint.size() != ctrl.size()) throw InvariantViolation("joint action size does not match controlled count");
  FlowState next = flow;
  next.step = flow.step + 1;
  for (std::size_t i = 0; i < flow.vehicles.size(); ++i) {
    if (!flow.vehicles[i].controlled) {
      next.vehicles[i].state = advance_uncontrolled(flow, i);
      next.vehicles[i].last_action = Action::KL;
    }
  }
  for (std::size_t k = 0; k < ctrl.size(); ++k) {
    auto& v = next.vehicles[ctrl[k]];
    v.state = apply_action(flow.vehicles[ctrl[k]].state, joint[k], actions, speed_limit());
    v.last_action = joint[k];
  }
  return next;
}

std::vector<JointAction> FlowModel::valid_joint_actions(const FlowState& flow,
                                                        const std::vector<std::vector<Action>>& sets) const {
  const auto ctrl = flow.controlled_indices();
  if (sets.size() != ctrl.size()) throw InvariantViolation("action set count does not match controlled count");
  std::vector<std::size_t> unctrl;
  std::vector<DecisionState> unctrl_next;
  for (std::size_t i = 0; i < flow.vehicles.size(); ++i) {
    if (flow.vehicles[i].controlled) continue;
    unctrl.push_back(i);
    unctrl_next.push_back(advance_uncontrolled(flow, i));
  }
  // per controlled vehicle, per candidate: successor and admissibility against every uncontrolled vehicle
  std::vector<std::vector<DecisionState>> next(ctrl.size());
  std::vector<std::vector<char>> ok(ctrl.size());
  for (std::size_t k = 0; k < ctrl.size(); ++k) {
    const FlowVehicle& v = flow.vehicles[ctrl[k]];
    for (Action a : sets[k]) {
      const DecisionState n = apply_action(v.state, a, actions, speed_limit());
      bool good = true;
      for (std::size_t u = 0; u < unctrl.size() && good; ++u) {
        good = pair_admissible(v, n, flow.vehicles[unctrl[u]], unctrl_next[u]);
      }
      next[k].push_back(n);
      ok[k].push_back(good ? 1 : 0);
    }
  }

  std::vector<JointAction> out;
  std::vector<std::size_t> pick(ctrl.size(), 0);
  JointAction joint(ctrl.size(), Action::KS);
  // depth-first over controlled vehicles with incremental pairwise pruning
  auto dfs = [&](auto&& self, std::size_t k) -> void {
    if (k == ctrl.size()) {
      out.push_back(joint);
      return;
    }
    const FlowVehicle& v = flow.vehicles[ctrl[k]];
    for (std::size_t c = 0; c < sets[k].size(); ++c) {
      if (!ok[k][c]) continue;
      bool good = true;
      for (std::size_t m = 0; m < k && good; ++m) {
        good = pair_admissible(flow.vehicles[ctrl[m]], next[m][pick[m]], v, next[k][c]);
      }
      if (!good) continue;
      pick[k] = c;
      joint[k] = sets[k][c];
      self(self, k + 1);
    }
  };
  dfs(dfs, 0);
  return out;
}

std::vector<Combination> FlowModel::expand_combinations(const FlowState& flow,
                                                        const std::vector<std::vector<Action>>& sets) const {
  std::vector<Combination> out;
  for (auto& joint : valid_joint_actions(flow, sets)) {
    FlowState next = successor(flow, joint);
    out.push_back({std::move(joint), std::move(next)});
  }
  return out;
}

void ChainStats::add_state(const FlowModel& model, const DecisionState& st, int target_lane) {
  const Road& road = *model.road;
  const double off = std::abs(st.d - road.lane_center(road.nearest_lane(st.d)));
  center_sum += off / (0.5 * road.lane_width);
  if (model.in_lane(st.d, target_lane)) {
    if (streak_start < 0) {
      streak_start = states;
      target_distance = 0.0;
    } else {
      target_distance += st.s - last_s;
    }
  } else {
    streak_start = -1;
    target_distance = 0.0;
  }
  last_s = st.s;
  ++states;
}

void ChainStats::add_action(Action a) {
  if (actions > 0 && a != last_action) ++switches;
  ++actions;
  last_action = a;
}

void ChainStats::pad_completed(int steps) {
  for (int i = 0; i < steps; ++i) {
    add_action(Action::KS);
    ++states;
  }
}

double ChainStats::reward(const RewardParams& p) const {
  const double r_target = streak_start < 0 ? 0.0 : std::max(0.0, 1.0 - static_cast<double>(streak_start) / p.horizon_steps);
  const double r_center = states > 0 ? std::clamp(1.0 - center_sum / states, 0.0, 1.0) : 1.0;
  const double r_consistency = actions <= 1 ? 1.0 : 1.0 - static_cast<double>(switches) / (actions - 1);
  return p.w_target * r_target + p.w_center * r_center + p.w_consistency * r_consistency;
}

double vehicle_reward(const FlowModel& model, const std::vector<DecisionState>& states,
                      const std::vector<Action>& actions, int target_lane, const RewardParams& p) {
  if (states.size() != actions.size() + 1) throw InvariantViolation("a chain needs one more state than actions");
  const Road& road = *model.road;
  // first index of the final in-target streak
  int k = -1;
  for (int i = static_cast<int>(states.size()) - 1; i >= 0; --i) {
    if (!model.in_lane(states[static_cast<std::size_t>(i)].d, target_lane)) break;
    k = i;
  }
  const double r_target = k < 0 ? 0.0 : std::max(0.0, 1.0 - static_cast<double>(k) / p.horizon_steps);
  double sum = 0.0;
  for (const auto& st : states) sum += std::abs(st.d - road.lane_center(road.nearest_lane(st.d))) / (0.5 * road.lane_width);
  const double r_center = std::clamp(1.0 - sum / static_cast<double>(states.size()), 0.0, 1.0);
  double r_consistency = 1.0;
  if (actions.size() > 1) {
    int switches = 0;
    for (std::size_t i = 1; i < actions.size(); ++i) switches += actions[i] != actions[i - 1] ? 1 : 0;
    r_consistency = 1.0 - static_cast<double>(switches) / static_cast<double>(actions.size() - 1);
  }
  return p.w_target * r_target + p.w_center * r_center + p.w_consistency * r_consistency;
}

double flow_reward(const std::vector<double>& rewards, const std::vector<double>& gammas) {
  if (rewards.size() != gammas.size()) throw InvariantViolation("reward and gamma counts differ");
  const std::size_t k = rewards.size();
  if (k == 0) return 0.0;
  double total = 0.0;
  for (double r : rewards) total += r;
  double x = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double others = total - rewards[i];
    x += (rewards[i] + gammas[i] * others) / (1.0 + (static_cast<double>(k) - 1.0) * gammas[i]);
  }
  return x / static_cast<double>(k);
}

double uct_value(double mean, int parent_visits, int child_visits, double cp) {
  if (child_visits <= 0) return std::numeric_limits<double>::infinity();
  return mean + 2.0 * cp * std::sqrt(2.0 * std::log(static_cast<double>(parent_visits)) / child_visits);
}

int uct_select(const std::vector<Metanode>& tree, int node, double cp) {
  const Metanode& n = tree.at(static_cast<std::size_t>(node));
  if (!n.initialized || !n.untried.empty() || n.children.empty()) {
    throw NotFullyExpanded("node " + std::to_string(node) + " still has untried combinations");
  }
  int best = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int c : n.children) {
    const Metanode& child = tree[static_cast<std::size_t>(c)];
    const double value = uct_value(child.mean(), n.visits, child.visits, cp);
    if (value > best_value) {
      best_value = value;
      best = c;
    }
  }
  return best;
}

void backpropagate(std::vector<Metanode>& tree, const std::vector<int>& path, double reward) {
  for (int idx : path) {
    auto& n = tree.at(static_cast<std::size_t>(idx));
    n.visits += 1;
    n.total_reward += reward;
  }
}

std::string_view signal_annotation(Action a) {
  switch (a) {
    case Action::LCL: return "left turn signal";
    case Action::LCR: return "right turn signal";
    case Action::DC: return "brake light";
    default: return "";
  }
}

MctsSearch::MctsSearch(FlowModel model, MctsConfig config, RewardParams reward)
    : model_(model), config_(config), reward_(reward) {}

bool MctsSearch::all_complete(const std::vector<ChainStats>& stats) const {
  for (const auto& s : stats) {
    if (s.streak_start < 0 || s.target_distance < config_.termination_distance - kEps) return false;
  }
  return true;
}

std::vector<Action> intention_mask(const FlowModel& model, const FlowVehicle& v, const std::vector<Action>& valid) {
  const Road& road = *model.road;
  const int lane = road.nearest_lane(v.state.d);
  const bool on_boundary = std::abs(v.state.d - road.lane_center(lane)) > 0.25 * road.lane_width;
  std::vector<Action> out;
  for (Action a : valid) {
    bool keep = false;
    if (on_boundary) {
      keep = is_lane_change(a);
    } else if (a == Action::LCL) {
      keep = v.target_lane < lane;
    } else if (a == Action::LCR) {
      keep = v.target_lane > lane;
    } else {
      keep = true;
    }
    if (keep) out.push_back(a);
  }
  return out.empty() ? valid : out;
}

std::vector<JointAction> MctsSearch::joint_actions(const FlowState& flow) const {
  if (config_.pruning) {
    auto sets = model_.action_sets(flow);
    if (config_.intention_masking) {
      const auto ctrl = flow.controlled_indices();
      for (std::size_t k = 0; k < ctrl.size(); ++k) sets[k] = intention_mask(model_, flow.vehicles[ctrl[k]], sets[k]);
    }
    return model_.valid_joint_actions(flow, sets);
  }
  const std::size_t k = flow.controlled_indices().size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < k; ++i) total *= kControlledActions.size();
  std::vector<JointAction> out;
  out.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    JointAction joint(k);
    std::size_t c = code;
    for (std::size_t i = k; i-- > 0;) {
      joint[i] = kControlledActions[c % kControlledActions.size()];
      c /= kControlledActions.size();
    }
    out.push_back(std::move(joint));
  }
  return out;
}

double MctsSearch::terminal_reward(std::vector<ChainStats> stats, int depth) const {
  if (all_complete(stats)) {
    for (auto& s : stats) s.pad_completed(config_.max_depth - depth);
  }
  std::vector<double> rewards;
  rewards.reserve(stats.size());
  for (const auto& s : stats) rewards.push_back(s.reward(reward_));
  return flow_reward(rewards, gammas_);
}

void MctsSearch::reset(const FlowState& root) {
  tree_.clear();
  gammas_.clear();
  targets_.clear();
  Metanode n;
  n.state = root;
  for (std::size_t i : root.controlled_indices()) {
    const FlowVehicle& v = root.vehicles[i];
    gammas_.push_back(v.gamma);
    targets_.push_back(v.target_lane);
    ChainStats s;
    s.add_state(model_, v.state, v.target_lane);
    if (s.streak_start == 0) s.target_distance = v.target_progress;
    n.stats.push_back(s);
  }
  tree_.push_back(std::move(n));
}

void MctsSearch::initialize(int node) {
  Metanode& n = tree_.at(static_cast<std::size_t>(node));
  if (n.initialized) return;
  n.initialized = true;
  if (all_complete(n.stats)) {
    n.terminal = true;
    n.completed = true;
    return;
  }
  if (n.depth >= config_.max_depth) {
    n.terminal = true;
    return;
  }
  auto joints = joint_actions(n.state);
  if (joints.empty()) {
    n.terminal = true;
    return;
  }
  auto rng = make_stream(config_.seed, kTagNode, static_cast<std::uint64_t>(node));
  shuffle(joints, rng);
  tree_[static_cast<std::size_t>(node)].untried = std::move(joints);
}

int MctsSearch::expand_one(int node) {
  initialize(node);
  Metanode& parent = tree_.at(static_cast<std::size_t>(node));
  if (parent.untried.empty()) throw InvariantViolation("node has no untried combination");
  JointAction joint = std::move(parent.untried.back());
  parent.untried.pop_back();

  Metanode child;
  child.state = model_.successor(parent.state, joint);
  child.parent = node;
  child.depth = parent.depth + 1;
  child.stats = parent.stats;
  const auto ctrl = child.state.controlled_indices();
  for (std::size_t k = 0; k < ctrl.size(); ++k) {
    child.stats[k].add_action(joint[k]);
    child.stats[k].add_state(model_, child.state.vehicles[ctrl[k]].state, targets_[k]);
  }
  child.incoming = std::move(joint);
  const int idx = static_cast<int>(tree_.size());
  tree_.push_back(std::move(child));
  tree_[static_cast<std::size_t>(node)].children.push_back(idx);
  return idx;
}

double MctsSearch::rollout(int node, std::uint64_t stream) {
  const Metanode& start = tree_.at(static_cast<std::size_t>(node));
  FlowState state = start.state;
  std::vector<ChainStats> stats = start.stats;
  int depth = start.depth;
  auto rng = make_stream(config_.seed, kTagRollout, stream);
  while (depth < config_.max_depth && !all_complete(stats)) {
    const auto joints = joint_actions(state);
    if (joints.empty()) break;
    const JointAction& joint = joints[uniform_index(rng, joints.size())];
    state = model_.successor(state, joint);
    const auto ctrl = state.controlled_indices();
    for (std::size_t k = 0; k < ctrl.size(); ++k) {
      stats[k].add_action(joint[k]);
      stats[k].add_state(model_, state.vehicles[ctrl[k]].state, targets_[k]);
    }
    ++depth;
  }
  return terminal_reward(std::move(stats), depth);
}

DecisionOutput MctsSearch::search(const FlowState& root) {
  reset(root);
  DecisionOutput out;
  for (std::size_t i : root.controlled_indices()) out.vehicle_ids.push_back(root.vehicles[i].id);
  out.sequences.assign(out.vehicle_ids.size(), {});
  out.chain.push_back(root);

  initialize(0);
  out.stats.root_combinations = static_cast<int>(tree_[0].untried.size());
  if (tree_[0].terminal && !tree_[0].completed && tree_[0].depth < config_.max_depth) {
    // no valid combination at the root: all controlled vehicles brake
    out.emergency = true;
    FlowState state = root;
    const JointAction brake(out.vehicle_ids.size(), Action::DC);
    for (int d = 0; d < config_.max_depth; ++d) {
      state = model_.successor(state, brake);
      out.chain.push_back(state);
      for (auto& seq : out.sequences) seq.push_back(Action::DC);
    }
    out.stats.expanded_nodes = 1;
    return out;
  }

  int iter = 0;
  for (; iter < config_.max_iterations; ++iter) {
    std::vector<int> path{0};
    int node = 0;
    // selection
    while (true) {
      initialize(node);
      const Metanode& n = tree_[static_cast<std::size_t>(node)];
      if (n.terminal || !n.untried.empty()) break;
      node = uct_select(tree_, node, config_.cp);
      path.push_back(node);
    }
    // expansion
    if (!tree_[static_cast<std::size_t>(node)].terminal) {
      node = expand_one(node);
      path.push_back(node);
    }
    const double reward = rollout(node, static_cast<std::uint64_t>(iter));
    backpropagate(tree_, path, reward);
    if (tree_[0].terminal) break;
  }
  out.stats.iterations = iter;
  out.stats.expanded_nodes = static_cast<int>(tree_.size());

  // greedy max-mean descent
  int node = 0;
  while (!tree_[static_cast<std::size_t>(node)].children.empty()) {
    int best = -1;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (int c : tree_[static_cast<std::size_t>(node)].children) {
      if (tree_[static_cast<std::size_t>(c)].mean() > best_mean) {
        best_mean = tree_[static_cast<std::size_t>(c)].mean();
        best = c;
      }
    }
    node = best;
    const Metanode& n = tree_[static_cast<std::size_t>(node)];
    for (std::size_t k = 0; k < n.incoming.size(); ++k) out.sequences[k].push_back(n.incoming[k]);
    out.chain.push_back(n.state);
  }
  // pad to the full horizon with the least eventful valid combination
  FlowState state = tree_[static_cast<std::size_t>(node)].state;
  for (int depth = tree_[static_cast<std::size_t>(node)].depth; depth < config_.max_depth; ++depth) {
    const auto joints = joint_actions(state);
    if (joints.empty()) break;
    std::size_t best = 0;
    long best_count = std::numeric_limits<long>::max();
    for (std::size_t j = 0; j < joints.size(); ++j) {
      const long c = std::count_if(joints[j].begin(), joints[j].end(), [](Action a) { return a != Action::KS; });
      if (c < best_count) {
        best_count = c;
        best = j;
      }
    }
    state = model_.successor(state, joints[best]);
    for (std::size_t k = 0; k < joints[best].size(); ++k) out.sequences[k].push_back(joints[best][k]);
    out.chain.push_back(state);
  }
  return out;
}

std::string serialize_decision(const DecisionOutput& out) {
  nlohmann::ordered_json j;
  j["emergency"] = out.emergency;
  j["expanded_nodes"] = out.stats.expanded_nodes;
  j["iterations"] = out.stats.iterations;
  j["root_combinations"] = out.stats.root_combinations;
  auto vehicles = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < out.vehicle_ids.size(); ++k) {
    nlohmann::ordered_json v;
    v["id"] = out.vehicle_ids[k];
    auto acts = nlohmann::ordered_json::array();
    auto sigs = nlohmann::ordered_json::array();
    for (Action a : out.sequences[k]) {
      acts.push_back(std::string(to_string(a)));
      sigs.push_back(std::string(signal_annotation(a)));
    }
    v["actions"] = acts;
    v["signals"] = sigs;
    vehicles.push_back(v);
  }
  j["vehicles"] = vehicles;
  return j.dump(2) + "\n";
}

DecisionOutput parse_decision(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("decision: ") + e.what());
  }
  DecisionOutput out;
  try {
    out.emergency = j.at("emergency").get<bool>();
    out.stats.expanded_nodes = j.at("expanded_nodes").get<int>();
    out.stats.iterations = j.at("iterations").get<int>();
    out.stats.root_combinations = j.at("root_combinations").get<int>();
    for (const auto& v : j.at("vehicles")) {
      out.vehicle_ids.push_back(v.at("id").get<int>());
      std::vector<Action> seq;
      for (const auto& a : v.at("actions")) seq.push_back(action_from_string(a.get<std::string>()));
      out.sequences.push_back(std::move(seq));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("decision: ") + e.what());
  }
  return out;
}

FlowModel flow_model(const Scenario& scenario) {
  FlowModel m;
  m.road = &scenario.road;
  m.actions = scenario.actions;
  m.safety = scenario.safety;
  return m;
}

FlowState initial_flow(const Scenario& scenario) {
  FlowState flow;
  for (const auto& spec : scenario.vehicles) {
    FlowVehicle v;
    v.id = spec.id;
    v.controlled = spec.controlled();
    v.geometry = spec.geometry;
    v.state = {spec.s0, scenario.road.lane_center(spec.lane0), spec.v0};
    v.target_lane = spec.target_lane();
    v.gamma = spec.profile.gamma;
    v.desired_speed = spec.desired_speed.value_or(scenario.road.speed_limit);
    v.last_action = v.controlled ? Action::KS : Action::KL;
    flow.vehicles.push_back(v);
  }
  return flow;
}

}  // namespace mvplan
