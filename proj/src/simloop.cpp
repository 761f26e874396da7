#include "mvplan/simloop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mvplan/errors.hpp"
#include "mvplan/prediction.hpp"

namespace mvplan {

std::string_view to_string(SimMode m) { return m == SimMode::Full ? "full" : "decision-only"; }

SimMode sim_mode_from_string(std::string_view s) {
  if (s == "full") return SimMode::Full;
  if (s == "decision-only") return SimMode::DecisionOnly;
  throw SchemaError("mode: unknown value '" + std::string(s) + "'");
}

namespace {

int ratio(double a, double b) { return static_cast<int>(std::lround(a / b)); }

bool is_multiple(double a, double b) { return std::abs(a / b - std::round(a / b)) < 1e-9 && a / b >= 1.0 - 1e-9; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t x = seed ^ (k * 0x9E3779B97F4A7C15ull);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Vehicle {
  const VehicleSpec* spec = nullptr;
  PlanStart st;
  double x = 0.0, y = 0.0, v = 0.0, theta = 0.0;
  std::string action;
  // controlled only
  std::vector<TrajectoryPoint> plan;
  int plan_tick = 0;
  std::vector<Action> seq;
  std::vector<double> nominal;  // decision step-end offsets
  int seq_tick = 0;             // tick at which seq[0] started
  int committed_lane = 0;
  bool emergency = false;
  DecisionState step_start;
  std::size_t step_index = 0;
  int target_streak = 0;
  double target_entry_s = 0.0;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v == 0.0 ? 0.0 : v);
  return buf;
}

class Engine {
 public:
  Engine(const Scenario& sc, const WeightSet& w, const SimConfig& cfg)
      : sc_(sc), weights_(w), cfg_(cfg), model_(flow_model(sc)), limits_(KinematicLimits::for_road(sc.road)) {
    per_replan_ = ratio(cfg.replan_period, cfg.tick);
    per_decision_ = ratio(cfg.decision_period, cfg.tick);
    max_ticks_ = ratio(cfg.max_duration, cfg.tick);
    for (const auto& spec : sc.vehicles) {
      Vehicle v;
      v.spec = &spec;
      v.st.s = spec.s0;
      v.st.s_dot = spec.v0;
      v.st.d = sc.road.lane_center(spec.lane0);
      v.committed_lane = spec.lane0;
      v.action = spec.controlled() ? "KS" : "KL";
      sync_cartesian(v);
      vehicles_.push_back(std::move(v));
    }
    log_.scenario_id = sc.id;
    log_.seed = cfg.seed;
    log_.mode = cfg.mode;
    log_.tick = cfg.tick;
    log_.lane_width = sc.road.lane_width;
    log_.delta_d = sc.actions.delta_d;
    log_.max_duration = cfg.max_duration;
    log_.settle_time = cfg.settle_time;
    for (const auto& spec : sc.vehicles) {
      log_.vehicles.push_back({spec.id, spec.controlled(), spec.geometry, spec.target_lane(),
                               std::string(to_string(spec.profile.behavior))});
    }
  }

  SimLog run() {
    const bool any_controlled = !sc_.controlled_ids().empty();
    for (int k = 0;; ++k) {
      const bool decide = any_controlled && (decision_due_ || k - decision_tick_ >= per_decision_) &&
                          (k % per_replan_ == 0 || k == 0);
      if (decide) run_decision(k);
      if (cfg_.mode == SimMode::Full && any_controlled && (decide || k % per_replan_ == 0)) replan_all(k);
      record(k);
      if (collided(k)) break;
      if (complete(k)) break;
      if (k >= max_ticks_) break;
      advance(k);
    }
    return std::move(log_);
  }

 private:
  void sync_cartesian(Vehicle& v) {
    const CartesianState c = frenet_to_cartesian(sc_.road.reference, {v.st.s, v.st.s_dot, v.st.d, v.st.d_dot});
    v.x = c.x;
    v.y = c.y;
    v.v = c.v;
    v.theta = c.theta;
  }

  void event(int k, int id, std::string kind, std::string detail = {}) {
    log_.events.push_back({k, id, std::move(kind), std::move(detail)});
  }

  FlowState flow_now() const {
    FlowState flow;
    const double dd = sc_.actions.delta_d;
    for (const auto& v : vehicles_) {
      FlowVehicle f;
      f.id = v.spec->id;
      f.controlled = v.spec->controlled();
      f.geometry = v.spec->geometry;
      const double d = f.controlled ? std::round(v.st.d / dd) * dd : v.st.d;
      f.state = {v.st.s, d, std::max(0.0, v.st.s_dot)};
      f.target_lane = v.spec->target_lane();
      f.gamma = v.spec->profile.gamma;
      f.desired_speed = v.spec->desired_speed.value_or(sc_.road.speed_limit);
      f.last_action = f.controlled ? action_from_string(v.action == "KL" ? "KS" : v.action) : Action::KL;
      if (f.controlled && v.target_streak > 0) f.target_progress = v.st.s - v.target_entry_s;
      flow.vehicles.push_back(f);
    }
    return flow;
  }

  void run_decision(int k) {
    MctsConfig mc;
    mc.max_iterations = cfg_.max_iterations;
    mc.max_depth = ratio(cfg_.decision_horizon, cfg_.decision_period);
    mc.seed = mix_seed(cfg_.seed, static_cast<std::uint64_t>(k));
    const FlowState flow = flow_now();
    MctsSearch search(model_, mc);
    const DecisionOutput out = search.search(flow);
    log_.expanded_nodes.push_back(out.stats.expanded_nodes);
    std::string detail;
    for (std::size_t c = 0; c < out.vehicle_ids.size(); ++c) {
      Vehicle& v = vehicle(out.vehicle_ids[c]);
      v.seq = out.sequences[c];
      v.nominal.clear();
      for (std::size_t i = 0; i + 1 < out.chain.size(); ++i) {
        v.nominal.push_back(out.chain[i + 1].vehicle(v.spec->id).state.d);
      }
      v.emergency = false;
      v.seq_tick = k;
      v.step_index = 0;
      v.step_start = flow.vehicle(v.spec->id).state;
      if (!detail.empty()) detail += ";";
      detail += std::to_string(v.spec->id) + ":";
      for (std::size_t i = 0; i < v.seq.size(); ++i) detail += (i ? "," : "") + std::string(to_string(v.seq[i]));
    }
    event(k, 0, out.emergency ? "decision_emergency" : "decision", detail);
    decision_tick_ = k;
    decision_due_ = false;
  }

  Vehicle& vehicle(int id) {
    for (auto& v : vehicles_) {
      if (v.spec->id == id) return v;
    }
    throw UnknownVehicle("no vehicle with id " + std::to_string(id));
  }

  TrafficSnapshot snapshot(double t) const {
    TrafficSnapshot snap;
    snap.road = &sc_.road;
    snap.delta_d = sc_.actions.delta_d;
    snap.time = t;
    for (const auto& v : vehicles_) {
      AgentState a;
      a.id = v.spec->id;
      a.geometry = v.spec->geometry;
      a.controlled = v.spec->controlled();
      a.s = v.st.s;
      a.s_dot = v.st.s_dot;
      a.s_ddot = v.st.s_ddot;
      a.d = v.st.d;
      a.d_dot = v.st.d_dot;
      a.desired_speed = v.spec->desired_speed.value_or(sc_.road.speed_limit);
      snap.agents.push_back(a);
    }
    return snap;
  }

  std::vector<PlanSegment> segments_for(const Vehicle& v, int k) const {
    const int rel = k - v.seq_tick;
    const auto idx = static_cast<std::size_t>(rel / per_decision_);
    const double remaining = (per_decision_ - rel % per_decision_) * cfg_.tick;
    const double hold = sc_.road.lane_center(sc_.road.nearest_lane(v.st.d));
    auto seg = [&](std::size_t i, double duration) {
      PlanSegment s;
      s.duration = duration;
      if (i < v.seq.size()) {
        s.action = v.seq[i];
        s.nominal_d = v.nominal[i];
      } else {
        s.action = Action::KS;
        s.nominal_d = v.nominal.empty() ? hold : v.nominal.back();
      }
      return s;
    };
    return {seg(idx, remaining), seg(idx + 1, cfg_.decision_period)};
  }

  void replan_all(int k) {
    const double t = k * cfg_.tick;
    const TrafficSnapshot snap = snapshot(t);
    const double horizon = cfg_.planning_horizon + cfg_.replan_period;
    std::vector<PredictedTrajectory> predictions;
    for (const auto& v : vehicles_) {
      const int id = v.spec->id;
      predictions.push_back(v.spec->controlled() ? predict_controlled_peer(id, &v.plan, snap, horizon)
                                                 : predict_uncontrolled(id, snap, horizon));
    }
    std::vector<std::vector<TrajectoryPoint>> new_plans(vehicles_.size());
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      Vehicle& v = vehicles_[i];
      if (!v.spec->controlled()) continue;
      PlanRequest req;
      req.vehicle_id = v.spec->id;
      req.geometry = v.spec->geometry;
      req.start = v.st;
      req.t0 = t;
      req.road = &sc_.road;
      req.actions = sc_.actions;
      req.safety = sc_.safety;
      req.weights = weights_.at(v.spec->profile.weights_id);
      req.limits = limits_;
      req.c_z = cfg_.c_z;
      for (std::size_t j = 0; j < vehicles_.size(); ++j) {
        if (j != i) req.predictions.push_back(predictions[j]);
      }
      const double source = sc_.road.lane_center(v.committed_lane);
      if (v.emergency) {
        new_plans[i] = emergency_trajectory(v.st, t, sc_.road, limits_.max_accel, cfg_.planning_horizon, source);
        continue;
      }
      req.segments = segments_for(v, k);
      PlanResult res = plan(req);
      if (res.ok()) {
        new_plans[i] = std::move(res.points);
        continue;
      }
      event(k, v.spec->id, "plan_failure", "segment " + std::to_string(*res.failed_segment));
      // abort: brake, then hold the lane the vehicle is leaving
      req.segments = {{Action::DC, cfg_.decision_period, source}, {Action::KS, cfg_.decision_period, source}};
      res = plan(req);
      decision_due_ = true;
      v.seq = {Action::DC, Action::KS};
      v.nominal = {source, source};
      v.seq_tick = k;
      if (res.ok()) {
        event(k, v.spec->id, "abort", "DC,KS");
        new_plans[i] = std::move(res.points);
        continue;
      }
      event(k, v.spec->id, "emergency", "max deceleration");
      v.emergency = true;
      new_plans[i] = emergency_trajectory(v.st, t, sc_.road, limits_.max_accel, cfg_.planning_horizon, source);
    }
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      if (!vehicles_[i].spec->controlled()) continue;
      vehicles_[i].plan = std::move(new_plans[i]);
      vehicles_[i].plan_tick = k;
    }
  }

  void record(int k) {
    for (auto& v : vehicles_) {
      if (v.spec->controlled()) {
        const auto idx = static_cast<std::size_t>((k - v.seq_tick) / per_decision_);
        v.action = v.emergency ? "DC" : idx < v.seq.size() ? std::string(to_string(v.seq[idx])) : "KS";
      }
      TickRecord r;
      r.tick = k;
      r.vehicle_id = v.spec->id;
      r.x = v.x;
      r.y = v.y;
      r.v = v.v;
      r.theta = v.theta;
      r.s = v.st.s;
      r.d = v.st.d;
      r.lane = sc_.road.nearest_lane(v.st.d);
      r.action = v.action;
      log_.rows.push_back(r);
      if (std::abs(v.st.d - sc_.road.lane_center(r.lane)) <= 0.25 * sc_.road.lane_width) v.committed_lane = r.lane;
    }
    log_.ticks = k + 1;
  }

  bool collided(int k) {
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      for (std::size_t j = i + 1; j < vehicles_.size(); ++j) {
        const auto& a = vehicles_[i];
        const auto& b = vehicles_[j];
        if (rectangles_overlap({a.x, a.y, a.theta, a.spec->geometry}, {b.x, b.y, b.theta, b.spec->geometry})) {
          event(k, a.spec->id, "collision", "with " + std::to_string(b.spec->id));
          log_.collision = true;
          return true;
        }
      }
    }
    return false;
  }

  bool complete(int k) {
    const int need = ratio(cfg_.settle_time, cfg_.tick);
    bool all = true, any = false;
    for (auto& v : vehicles_) {
      if (!v.spec->controlled()) continue;
      any = true;
      if (model_.in_lane(v.st.d, v.spec->target_lane())) {
        if (v.target_streak++ == 0) v.target_entry_s = v.st.s;
      } else {
        v.target_streak = 0;
      }
      if (v.target_streak <= need) all = false;
    }
    if (any && all) event(k, 0, "complete");
    return any && all;
  }

  void advance(int k) {
    const double t = k * cfg_.tick;
    const TrafficSnapshot snap = snapshot(t);
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      Vehicle& v = vehicles_[i];
      if (!v.spec->controlled()) {
        advance_uncontrolled(v, snap, t);
      } else if (cfg_.mode == SimMode::DecisionOnly) {
        advance_decision_only(v, k + 1);
      } else {
        advance_on_plan(v, k + 1);
      }
      sync_cartesian(v);
    }
  }

  void advance_uncontrolled(Vehicle& v, const TrafficSnapshot& snap, double t) {
    const ScriptSegment* active = nullptr;
    for (const auto& seg : v.spec->script) {
      if (t + 1e-9 >= seg.t_start && t + 1e-9 < seg.t_end) {
        active = &seg;
        break;
      }
    }
    const LeaderInfo lead = find_leader(snap, v.spec->id, v.st.s, v.st.d, 0.0);
    const double gap = std::isfinite(lead.gap) ? std::max(lead.gap, 1e-3) : kNoNeighbor;
    double a = car_following_acceleration(v.st.s_dot, lead.v_lead, gap, car_following_for(snap.agent(v.spec->id)));
    if (active) a = a < 0.0 ? std::min(a, active->accel) : active->accel;
    integrate_longitudinal(v.st.s, v.st.s_dot, a, cfg_.tick);
    v.st.s_ddot = v.st.s_dot > 0.0 ? a : 0.0;
    v.st.d = sc_.road.lane_center(sc_.road.nearest_lane(v.st.d));
    v.st.d_dot = 0.0;
  }

  void advance_on_plan(Vehicle& v, int k_next) {
    const auto idx = static_cast<std::size_t>(k_next - v.plan_tick);
    if (idx < v.plan.size()) {
      const TrajectoryPoint& p = v.plan[idx];
      v.st = {p.s, p.s_dot, p.s_ddot, p.d, p.d_dot, p.d_ddot};
      return;
    }
    v.st.s += v.st.s_dot * cfg_.tick;
    v.st.s_ddot = 0.0;
  }

  void advance_decision_only(Vehicle& v, int k_next) {
    const int rel = k_next - v.seq_tick;
    const auto step = static_cast<std::size_t>(rel / per_decision_);
    while (v.step_index < step) {
      const Action a = v.step_index < v.seq.size() ? v.seq[v.step_index] : Action::KS;
      v.step_start = apply_action(v.step_start, a, sc_.actions, sc_.road.speed_limit);
      ++v.step_index;
    }
    const Action a = step < v.seq.size() ? v.seq[step] : Action::KS;
    const double f = static_cast<double>(rel % per_decision_) / per_decision_;
    const DecisionState now = decision_only_step(v.step_start, a, sc_.actions, sc_.road.speed_limit, f);
    const DecisionState end = apply_action(v.step_start, a, sc_.actions, sc_.road.speed_limit);
    v.st = {now.s, now.v, (end.v - v.step_start.v) / sc_.actions.dt, now.d, (end.d - v.step_start.d) / sc_.actions.dt, 0.0};
    if (rel % per_decision_ == 0) v.st.d_dot = 0.0;
  }

  const Scenario& sc_;
  const WeightSet& weights_;
  SimConfig cfg_;
  FlowModel model_;
  KinematicLimits limits_;
  int per_replan_ = 5;
  int per_decision_ = 15;
  int max_ticks_ = 300;
  int decision_tick_ = 0;
  bool decision_due_ = true;
  std::vector<Vehicle> vehicles_;
  SimLog log_;
};

}  // namespace

void SimConfig::validate() const {
  if (!(tick > 0.0)) throw InvariantViolation("tick must be positive");
  if (!is_multiple(replan_period, tick)) throw InvariantViolation("replan period must be a multiple of the tick");
  if (!is_multiple(decision_period, replan_period)) {
    throw InvariantViolation("decision period must be a multiple of the replan period");
  }
  if (planning_horizon > decision_horizon) throw InvariantViolation("planning horizon exceeds decision horizon");
  if (!(max_duration > 0.0)) throw InvariantViolation("max duration must be positive");
}

DecisionState decision_only_step(const DecisionState& start, Action action, const ActionParams& params,
                                 double speed_limit, double f) {
  const DecisionState end = apply_action(start, action, params, speed_limit);
  return {start.s + f * (end.s - start.s), start.d + f * (end.d - start.d), start.v + f * (end.v - start.v)};
}

SimLog run(const Scenario& scenario, const WeightSet& weights, const SimConfig& cfg) {
  cfg.validate();
  check_weight_references(scenario, weights);
  Engine engine(scenario, weights, cfg);
  return engine.run();
}

std::vector<std::optional<double>> finish_times(const SimLog& log) {
  std::vector<std::optional<double>> out;
  for (const auto& meta : log.vehicles) {
    if (!meta.controlled) continue;
    std::optional<int> start;
    for (const auto& r : log.rows) {
      if (r.vehicle_id != meta.id) continue;
      const double center = meta.target_lane * log.lane_width;
      if (std::abs(r.d - center) <= 0.5 * log.delta_d + 1e-9) {
        if (!start) start = r.tick;
      } else {
        start.reset();
      }
    }
    out.push_back(start ? std::optional<double>(*start * log.tick) : std::nullopt);
  }
  return out;
}

Metrics compute_metrics(const SimLog& log) {
  Metrics m;
  m.scenario_id = log.scenario_id;
  m.seed = log.seed;
  m.mode = log.mode;
  m.collision = log.collision;
  m.duration = log.ticks > 0 ? (log.ticks - 1) * log.tick : 0.0;
  for (const auto& e : log.events) {
    if (e.kind == "abort" || e.kind == "emergency") ++m.aborts;
  }
  if (!log.expanded_nodes.empty()) {
    double sum = 0.0;
    for (int n : log.expanded_nodes) sum += n;
    m.avg_expanded_nodes = sum / static_cast<double>(log.expanded_nodes.size());
  }
  const auto finishes = finish_times(log);
  bool settled = !finishes.empty();
  double sum = 0.0;
  for (const auto& f : finishes) {
    if (!f || m.duration - *f < log.settle_time - 1e-9) {
      settled = false;
    } else {
      sum += *f;
    }
  }
  if (settled) m.avg_finish_time = sum / static_cast<double>(finishes.size());
  m.success = settled && !log.collision;

  if (log.vehicles.size() >= 2) {
    std::map<int, VehicleGeometry> geom;
    for (const auto& v : log.vehicles) geom[v.id] = v.geometry;
    double best = std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < log.rows.size()) {
      std::size_t j = i;
      while (j < log.rows.size() && log.rows[j].tick == log.rows[i].tick) ++j;
      for (std::size_t a = i; a < j; ++a) {
        const BodyPose pa{log.rows[a].x, log.rows[a].y, log.rows[a].theta, geom[log.rows[a].vehicle_id]};
        for (std::size_t b = a + 1; b < j; ++b) {
          const BodyPose pb{log.rows[b].x, log.rows[b].y, log.rows[b].theta, geom[log.rows[b].vehicle_id]};
          best = std::min(best, rectangle_distance(pa, pb));
        }
      }
      i = j;
    }
    if (std::isfinite(best)) m.min_distance = best;
  }
  return m;
}

std::string serialize_log_csv(const SimLog& log) {
  std::string out = "tick,vehicle_id,x,y,v,theta,lane,action,s,d\n";
  for (const auto& r : log.rows) {
    out += std::to_string(r.tick) + "," + std::to_string(r.vehicle_id) + "," + fmt(r.x) + "," + fmt(r.y) + "," +
           fmt(r.v) + "," + fmt(r.theta) + "," + std::to_string(r.lane) + "," + r.action + "," + fmt(r.s) + "," +
           fmt(r.d) + "\n";
  }
  return out;
}

std::vector<TickRecord> parse_log_csv(std::string_view text) {
  std::vector<TickRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("tick,vehicle_id,x,y,v,theta,lane,action", 0) != 0) {
    throw SchemaError("log: missing or unexpected header");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw SchemaError("log: line " + std::to_string(line_no) + " has " + std::to_string(f.size()) + " fields");
    try {
      TickRecord r;
      r.tick = std::stoi(f[0]);
      r.vehicle_id = std::stoi(f[1]);
      r.x = std::stod(f[2]);
      r.y = std::stod(f[3]);
      r.v = std::stod(f[4]);
      r.theta = std::stod(f[5]);
      r.lane = std::stoi(f[6]);
      r.action = f[7];
      r.s = std::stod(f[8]);
      r.d = std::stod(f[9]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw SchemaError("log: line " + std::to_string(line_no) + " is malformed");
    }
  }
  return out;
}

std::string serialize_events_csv(const SimLog& log) {
  std::string out = "tick,vehicle_id,kind,detail\n";
  for (const auto& e : log.events) {
    out += std::to_string(e.tick) + "," + std::to_string(e.vehicle_id) + "," + e.kind + ",\"" + e.detail + "\"\n";
  }
  return out;
}

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

nlohmann::json parse_json(std::string_view text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string serialize_metrics(const Metrics& m) {
  nlohmann::ordered_json j;
  j["scenario_id"] = m.scenario_id;
  j["seed"] = m.seed;
  j["mode"] = std::string(to_string(m.mode));
  j["success"] = m.success;
  j["collision"] = m.collision;
  j["aborts"] = m.aborts;
  j["duration"] = m.duration;
  j["avg_expanded_nodes"] = m.avg_expanded_nodes;
  j["avg_finish_time"] = optional_json(m.avg_finish_time);
  j["min_distance"] = optional_json(m.min_distance);
  return j.dump(2) + "\n";
}

Metrics parse_metrics(std::string_view text) {
  const nlohmann::json j = parse_json(text, "metrics");
  Metrics m;
  try {
    m.scenario_id = j.at("scenario_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.mode = sim_mode_from_string(j.at("mode").get<std::string>());
    m.success = j.at("success").get<bool>();
    m.collision = j.at("collision").get<bool>();
    m.aborts = j.at("aborts").get<int>();
    m.duration = j.at("duration").get<double>();
    m.avg_expanded_nodes = j.at("avg_expanded_nodes").get<double>();
    m.avg_finish_time = optional_from(j, "avg_finish_time");
    m.min_distance = optional_from(j, "min_distance");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("metrics: ") + e.what());
  }
  return m;
}

Aggregate aggregate(const std::vector<Metrics>& runs) {
  Aggregate a;
  a.runs = static_cast<int>(runs.size());
  if (runs.empty()) return a;
  a.mode = std::string(to_string(runs.front().mode));
  double nodes = 0.0, finish = 0.0;
  int finished = 0;
  for (const auto& m : runs) {
    if (m.success) ++a.successes;
    nodes += m.avg_expanded_nodes;
    if (m.success && m.avg_finish_time) {
      finish += *m.avg_finish_time;
      ++finished;
    }
    if (m.min_distance) a.min_distance = a.min_distance ? std::min(*a.min_distance, *m.min_distance) : *m.min_distance;
  }
  a.success_rate = static_cast<double>(a.successes) / a.runs;
  a.avg_expanded_nodes = nodes / a.runs;
  if (finished > 0) a.avg_finish_time = finish / finished;
  return a;
}

std::string serialize_aggregate(const Aggregate& a) {
  nlohmann::ordered_json j;
  j["mode"] = a.mode;
  j["runs"] = a.runs;
  j["successes"] = a.successes;
  j["success_rate"] = a.success_rate;
  j["avg_expanded_nodes"] = a.avg_expanded_nodes;
  j["avg_finish_time"] = optional_json(a.avg_finish_time);
  j["min_distance"] = optional_json(a.min_distance);
  return j.dump(2) + "\n";
}

Aggregate parse_aggregate(std::string_view text) {
  const nlohmann::json j = parse_json(text, "aggregate");
  Aggregate a;
  try {
    a.mode = j.at("mode").get<std::string>();
    a.runs = j.at("runs").get<int>();
    a.successes = j.at("successes").get<int>();
    a.success_rate = j.at("success_rate").get<double>();
    a.avg_expanded_nodes = j.at("avg_expanded_nodes").get<double>();
    a.avg_finish_time = optional_from(j, "avg_finish_time");
    a.min_distance = optional_from(j, "min_distance");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("aggregate: ") + e.what());
  }
  return a;
}

}  // namespace mvplan
