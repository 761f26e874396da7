#include <gtest/gtest.h>

#include <cmath>

#include "mvplan/errors.hpp"
#include "mvplan/simloop.hpp"

using namespace mvplan;

namespace {

const std::string kData = MVPLAN_DATA_DIR;

Scenario fixture(const std::string& name) { return load_scenario_file(kData + "/scenarios/" + name + ".json"); }

SimLog run_fixture(const std::string& name, std::uint64_t seed, SimMode mode = SimMode::Full) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.mode = mode;
  return run(fixture(name), default_weight_set(), cfg);
}

// two side-by-side vehicles, one controlled and settled in its lane
SimLog parallel_log(int ticks, double lateral) {
  SimLog log;
  log.vehicles = {{1, true, {}, 0, "normal"}, {2, false, {}, 1, ""}};
  for (int t = 0; t < ticks; ++t) {
    log.rows.push_back({t, 1, 10.0 * t * 0.1, 0.0, 10.0, 0.0, 10.0 * t * 0.1, 0.0, 0, "KS"});
    log.rows.push_back({t, 2, 10.0 * t * 0.1, lateral, 10.0, 0.0, 10.0 * t * 0.1, lateral, 1, "KL"});
  }
  log.ticks = ticks;
  return log;
}

bool any_overlap(const SimLog& log) {
  std::map<int, VehicleGeometry> g;
  for (const auto& v : log.vehicles) g[v.id] = v.geometry;
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    for (std::size_t j = i + 1; j < log.rows.size() && log.rows[j].tick == log.rows[i].tick; ++j) {
      const auto& a = log.rows[i];
      const auto& b = log.rows[j];
      if (rectangles_overlap({a.x, a.y, a.theta, g[a.vehicle_id]}, {b.x, b.y, b.theta, g[b.vehicle_id]})) return true;
    }
  }
  return false;
}

}  // namespace

TEST(SimConfig, Validation) {
  SimConfig c;
  EXPECT_NO_THROW(c.validate());
  c.replan_period = 0.45;
  EXPECT_THROW(c.validate(), InvariantViolation);
  c = SimConfig{};
  c.decision_period = 1.2;
  EXPECT_THROW(c.validate(), InvariantViolation);
  c = SimConfig{};
  c.planning_horizon = 12.0;
  EXPECT_THROW(c.validate(), InvariantViolation);
}

TEST(Metrics, ParallelVehiclesDistance) {
  const Metrics m = compute_metrics(parallel_log(40, 3.5));
  ASSERT_TRUE(m.min_distance.has_value());
  EXPECT_NEAR(*m.min_distance, 1.5, 1e-12);
  EXPECT_TRUE(m.success);
  ASSERT_TRUE(m.avg_finish_time.has_value());
  EXPECT_DOUBLE_EQ(*m.avg_finish_time, 0.0);
}

TEST(Metrics, CollisionFailsTheRun) {
  SimLog log = parallel_log(40, 1.0);
  log.collision = true;
  const Metrics m = compute_metrics(log);
  EXPECT_FALSE(m.success);
  EXPECT_TRUE(m.collision);
  EXPECT_DOUBLE_EQ(*m.min_distance, 0.0);
}

TEST(Metrics, UnsettledIsNotSuccess) {
  // in the target lane only for the last second
  SimLog log = parallel_log(40, 3.5);
  for (auto& r : log.rows) {
    if (r.vehicle_id == 1 && r.tick < 30) r.d = 3.5;
  }
  const Metrics m = compute_metrics(log);
  EXPECT_FALSE(m.success);
  EXPECT_FALSE(m.avg_finish_time.has_value());
  const auto f = finish_times(log);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_NEAR(*f[0], 3.0, 1e-12);
}

TEST(Metrics, SerializeRoundTrip) {
  Metrics m = compute_metrics(parallel_log(30, 3.5));
  m.scenario_id = "x";
  m.seed = 4;
  m.mode = SimMode::DecisionOnly;
  const std::string text = serialize_metrics(m);
  EXPECT_EQ(serialize_metrics(parse_metrics(text)), text);
  EXPECT_NE(text.find("decision-only"), std::string::npos);
}

TEST(Aggregate, SuccessRateIsExact) {
  std::vector<Metrics> runs(3);
  runs[0].success = true;
  runs[0].avg_finish_time = 2.0;
  runs[0].min_distance = 12.0;
  runs[1].success = false;
  runs[1].min_distance = 4.0;
  runs[2].success = true;
  runs[2].avg_finish_time = 4.0;
  runs[2].min_distance = 9.0;
  const Aggregate a = aggregate(runs);
  EXPECT_EQ(a.runs, 3);
  EXPECT_EQ(a.successes, 2);
  EXPECT_DOUBLE_EQ(a.success_rate, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*a.avg_finish_time, 3.0);
  EXPECT_DOUBLE_EQ(*a.min_distance, 4.0);
  const std::string text = serialize_aggregate(a);
  EXPECT_EQ(serialize_aggregate(parse_aggregate(text)), text);
}

TEST(DecisionOnlyStep, KeepSpeedIsLinear) {
  for (int k = 0; k <= 15; ++k) {
    const auto st = decision_only_step({0.0, 3.5, 10.0}, Action::KS, ActionParams{}, 16.7, k / 15.0);
    EXPECT_NEAR(st.s, 1.0 * k, 1e-12);
    EXPECT_DOUBLE_EQ(st.d, 3.5);
  }
}

TEST(DecisionOnlyStep, LaneChangeRampsLinearly) {
  for (int k = 0; k <= 15; ++k) {
    const auto st = decision_only_step({0.0, 3.5, 10.0}, Action::LCL, ActionParams{}, 16.7, k / 15.0);
    EXPECT_NEAR(st.d, 3.5 - 1.75 * k / 15.0, 1e-12);
  }
  const auto end = decision_only_step({0.0, 3.5, 10.0}, Action::AC, ActionParams{}, 16.7, 1.0);
  EXPECT_NEAR(end.s, 15.675, 1e-12);
  EXPECT_NEAR(end.v, 10.9, 1e-12);
}

TEST(Run, LoneVehicleKeepingItsLane) {
  Scenario sc = fixture("single_vehicle");
  sc.vehicles[0].profile.target_lane = sc.vehicles[0].lane0;
  SimConfig cfg;
  cfg.max_duration = 6.0;
  const Metrics m = compute_metrics(run(sc, default_weight_set(), cfg));
  EXPECT_TRUE(m.success);
  EXPECT_FALSE(m.min_distance.has_value());
  ASSERT_TRUE(m.avg_finish_time.has_value());
  EXPECT_DOUBLE_EQ(*m.avg_finish_time, 0.0);
}

TEST(Run, LoneVehicleChangesLane) {
  const SimLog log = run_fixture("single_vehicle", 0);
  const Metrics m = compute_metrics(log);
  EXPECT_TRUE(m.success);
  EXPECT_LT(*m.avg_finish_time, 10.0);
  EXPECT_EQ(static_cast<int>(log.rows.size()), log.ticks);
}

TEST(Run, TwoVehicleFreeway) {
  const SimLog log = run_fixture("freeway_2av", 0);
  const Metrics m = compute_metrics(log);
  EXPECT_TRUE(m.success);
  ASSERT_TRUE(m.min_distance.has_value());
  EXPECT_GE(*m.min_distance, 9.0);
  EXPECT_LT(m.avg_expanded_nodes, 3000.0);
  EXPECT_FALSE(any_overlap(log));
  EXPECT_EQ(static_cast<int>(log.rows.size()), log.ticks * static_cast<int>(log.vehicles.size()));
}

TEST(Run, ReplayIsByteIdentical) {
  for (SimMode mode : {SimMode::Full, SimMode::DecisionOnly}) {
    const SimLog a = run_fixture("freeway_3av", 5, mode);
    const SimLog b = run_fixture("freeway_3av", 5, mode);
    EXPECT_EQ(serialize_log_csv(a), serialize_log_csv(b));
    EXPECT_EQ(serialize_events_csv(a), serialize_events_csv(b));
  }
}

TEST(Run, DecisionOnlyReportsFinishTimes) {
  const Metrics m = compute_metrics(run_fixture("freeway_3av", 2, SimMode::DecisionOnly));
  EXPECT_EQ(m.mode, SimMode::DecisionOnly);
  EXPECT_TRUE(m.success);
  ASSERT_TRUE(m.avg_finish_time.has_value());
  EXPECT_GT(*m.avg_finish_time, 0.0);
  EXPECT_LT(*m.avg_finish_time, 30.0);
}

TEST(Run, NonCooperativeMergeAborts) {
  const SimLog log = run_fixture("ramp_case3", 0);
  const Metrics m = compute_metrics(log);
  EXPECT_FALSE(m.collision);
  EXPECT_TRUE(m.success);
  int failure_tick = -1, abort_tick = -1;
  for (const auto& e : log.events) {
    if (e.kind == "plan_failure" && failure_tick < 0) failure_tick = e.tick;
    if (e.kind == "abort" && abort_tick < 0) abort_tick = e.tick;
  }
  ASSERT_GE(failure_tick, 0);
  ASSERT_GE(abort_tick, failure_tick);
  // the abort lands within one replan period of the failure
  EXPECT_LE(abort_tick - failure_tick, 5);
}

TEST(Run, ExecutedStatesFollowPlans) {
  // between replans a controlled vehicle moves by exactly its planned samples,
  // so its per-tick speed change never exceeds the planner's acceleration bound
  const SimLog log = run_fixture("freeway_2av", 1);
  std::map<int, double> last_v;
  for (const auto& r : log.rows) {
    if (r.vehicle_id > 2) continue;
    if (last_v.count(r.vehicle_id)) EXPECT_LE(std::abs(r.v - last_v[r.vehicle_id]), 0.4 + 1e-9);
    last_v[r.vehicle_id] = r.v;
  }
}

TEST(LogCsv, RoundTrip) {
  const SimLog log = run_fixture("single_vehicle", 3);
  const std::string text = serialize_log_csv(log);
  const auto rows = parse_log_csv(text);
  ASSERT_EQ(rows.size(), log.rows.size());
  SimLog copy;
  copy.rows = rows;
  EXPECT_EQ(serialize_log_csv(copy), text);
}

TEST(SimMode, Strings) {
  EXPECT_EQ(sim_mode_from_string("decision-only"), SimMode::DecisionOnly);
  EXPECT_EQ(to_string(SimMode::Full), "full");
  EXPECT_THROW(sim_mode_from_string("fast"), SchemaError);
}
