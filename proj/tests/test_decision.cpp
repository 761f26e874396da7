#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "flow_oracle.hpp"
#include "mvplan/decision.hpp"
#include "mvplan/errors.hpp"
#include "mvplan/scenario_io.hpp"

using namespace mvplan;

namespace {

const std::string kData = MVPLAN_DATA_DIR;

FlowVehicle car(int id, double s, double d, double v, bool controlled = true, int target = -1) {
  FlowVehicle f;
  f.id = id;
  f.controlled = controlled;
  f.state = {s, d, v};
  f.target_lane = target >= 0 ? target : static_cast<int>(std::lround(d / 3.5));
  f.last_action = controlled ? Action::KS : Action::KL;
  return f;
}

bool has(const std::vector<Action>& set, Action a) { return std::find(set.begin(), set.end(), a) != set.end(); }

class DecisionTest : public ::testing::Test {
 protected:
  Road road = oracle::straight_road(3);
  FlowModel model() const {
    FlowModel m;
    m.road = &road;
    return m;
  }
};

// per-vehicle reward of the extracted chain
double chain_reward(const FlowModel& m, const DecisionOutput& out, std::size_t k, int target) {
  std::vector<DecisionState> states;
  for (const auto& f : out.chain) states.push_back(f.vehicle(out.vehicle_ids[k]).state);
  return vehicle_reward(m, states, out.sequences[k], target);
}

}  // namespace

TEST_F(DecisionTest, LoneVehicleHasEveryAction) {
  FlowState f;
  f.vehicles = {car(1, 100.0, 3.5, 10.0)};
  EXPECT_EQ(model().enumerate_vehicle_actions(f, 1).size(), 5u);
}

TEST_F(DecisionTest, NoLaneChangeOverTheBorder) {
  FlowState f;
  f.vehicles = {car(1, 100.0, 0.0, 10.0), car(2, 100.0, 7.0, 10.0)};
  const auto left = model().enumerate_vehicle_actions(f, 1);
  EXPECT_FALSE(has(left, Action::LCL));
  EXPECT_TRUE(has(left, Action::LCR));
  const auto right = model().enumerate_vehicle_actions(f, 2);
  EXPECT_FALSE(has(right, Action::LCR));
  EXPECT_TRUE(has(right, Action::LCL));
}

TEST_F(DecisionTest, CloseSlowLeaderRemovesKeepAndAccelerate) {
  FlowState f;
  // 6 m bumper gap to an uncontrolled leader at 8 m/s
  f.vehicles = {car(1, 100.0, 3.5, 10.0), car(2, 111.0, 3.5, 8.0, false)};
  const auto set = model().enumerate_vehicle_actions(f, 1);
  EXPECT_FALSE(has(set, Action::KS));
  EXPECT_FALSE(has(set, Action::AC));
  EXPECT_TRUE(has(set, Action::DC));
}

TEST_F(DecisionTest, EmptyWindowFallsBackToBrake) {
  FlowState f;
  f.vehicles = {car(1, 100.0, 3.5, 15.0), car(2, 106.0, 3.5, 0.0, false), car(3, 94.0, 3.5, 15.0, false)};
  EXPECT_EQ(model().enumerate_vehicle_actions(f, 1), std::vector<Action>{Action::DC});
}

TEST_F(DecisionTest, EnumerateErrors) {
  FlowState f;
  f.vehicles = {car(1, 100.0, 3.5, 10.0), car(2, 150.0, 3.5, 10.0, false)};
  EXPECT_THROW(model().enumerate_vehicle_actions(f, 7), UnknownVehicle);
  EXPECT_THROW(model().enumerate_vehicle_actions(f, 2), UnsupportedAction);
}

TEST_F(DecisionTest, SingleVehicleCombinationsMatchItsSet) {
  FlowState f;
  f.vehicles = {car(1, 100.0, 3.5, 10.0)};
  const auto m = model();
  const auto sets = m.action_sets(f);
  const auto combos = m.expand_combinations(f, sets);
  ASSERT_EQ(combos.size(), sets[0].size());
  for (std::size_t i = 0; i < combos.size(); ++i) {
    EXPECT_EQ(combos[i].actions[0], sets[0][i]);
    EXPECT_EQ(combos[i].next.step, 1);
  }
}

TEST_F(DecisionTest, SwapIntoEachOtherIsPruned) {
  FlowState f;
  // lane 0 vehicle 15 m ahead of a lane 1 vehicle, same speed
  f.vehicles = {car(1, 115.0, 0.0, 10.0), car(2, 100.0, 3.5, 10.0)};
  const std::vector<std::vector<Action>> sets{{Action::LCR, Action::KS}, {Action::LCL, Action::KS}};
  const auto joints = model().valid_joint_actions(f, sets);
  EXPECT_EQ(joints.size(), 3u);
  EXPECT_EQ(std::count(joints.begin(), joints.end(), JointAction{Action::LCR, Action::LCL}), 0);
}

TEST_F(DecisionTest, AdjacentPairWithLeaderLosesCombinations) {
  FlowState f;
  f.vehicles = {car(1, 100.0, 3.5, 12.0), car(2, 96.0, 7.0, 12.0), car(3, 125.0, 3.5, 10.0, false)};
  const std::vector<std::vector<Action>> all(2, std::vector<Action>(kControlledActions.begin(), kControlledActions.end()));
  const auto joints = model().valid_joint_actions(f, all);
  EXPECT_LT(joints.size(), 25u);
  EXPECT_GT(joints.size(), 0u);
}

TEST_F(DecisionTest, PruningMatchesBruteForce) {
  std::mt19937_64 rng(2024);
  const auto m = model();
  for (int trial = 0; trial < 60; ++trial) {
    const FlowState f = oracle::random_flow(rng, road, 3);
    auto got = m.valid_joint_actions(f, m.action_sets(f));
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, oracle::brute_force_valid(m, f)) << "trial " << trial;
  }
}

TEST_F(DecisionTest, SuccessorAdvancesEveryone) {
  FlowState f;
  f.vehicles = {car(1, 100.0, 3.5, 10.0), car(2, 200.0, 0.0, 16.7, false)};
  const auto next = model().successor(f, {Action::LCL});
  EXPECT_DOUBLE_EQ(next.vehicles[0].state.d, 1.75);
  EXPECT_DOUBLE_EQ(next.vehicles[0].state.s, 115.0);
  EXPECT_NEAR(next.vehicles[1].state.s, 200.0 + 16.7 * 1.5, 1e-9);
  EXPECT_EQ(next.vehicles[1].last_action, Action::KL);
  EXPECT_THROW(model().successor(f, {Action::KS, Action::KS}), InvariantViolation);
}

TEST_F(DecisionTest, RewardExamples) {
  const auto m = model();
  std::vector<DecisionState> centered;
  for (int i = 0; i <= 7; ++i) centered.push_back({15.0 * i, 3.5, 10.0});
  const std::vector<Action> ks(7, Action::KS);
  EXPECT_NEAR(vehicle_reward(m, centered, ks, 1), 1.0, 1e-12);
  EXPECT_NEAR(vehicle_reward(m, centered, ks, 2), 0.6, 1e-12);

  std::vector<Action> zigzag;
  for (int i = 0; i < 7; ++i) zigzag.push_back(i % 2 ? Action::DC : Action::AC);
  EXPECT_NEAR(vehicle_reward(m, centered, zigzag, 2), 0.3, 1e-12);
  EXPECT_THROW(vehicle_reward(m, centered, std::vector<Action>(3, Action::KS), 1), InvariantViolation);
}

TEST_F(DecisionTest, LateArrivalScoresLess) {
  const auto m = model();
  std::vector<DecisionState> states{{0, 0.0, 10}, {15, 1.75, 10}, {30, 3.5, 10}, {45, 3.5, 10}};
  const std::vector<Action> acts{Action::LCR, Action::LCR, Action::KS};
  const double early = vehicle_reward(m, states, acts, 1);
  states[2].d = 1.75;
  const double late = vehicle_reward(m, states, {Action::LCR, Action::KS, Action::LCR}, 1);
  EXPECT_LT(late, early);
}

TEST_F(DecisionTest, IncrementalStatsMatchBatchReward) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 4);
  const auto m = model();
  for (int trial = 0; trial < 300; ++trial) {
    DecisionState st{0.0, 3.5, 10.0};
    const int target = pick(rng) % 3;
    std::vector<DecisionState> states{st};
    std::vector<Action> acts;
    ChainStats cs;
    cs.add_state(m, st, target);
    for (int k = 0; k < 7; ++k) {
      Action a = kControlledActions[static_cast<std::size_t>(pick(rng))];
      st = apply_action(st, a, ActionParams{}, 16.7);
      st.d = std::clamp(st.d, 0.0, 7.0);
      acts.push_back(a);
      states.push_back(st);
      cs.add_action(a);
      cs.add_state(m, st, target);
    }
    EXPECT_NEAR(cs.reward(RewardParams{}), vehicle_reward(m, states, acts, target), 1e-12) << "trial " << trial;
  }
}

TEST(FlowReward, SingleVehicleIgnoresGamma) {
  for (double g : {0.0, 0.3, 1.0}) EXPECT_DOUBLE_EQ(flow_reward({0.42}, {g}), 0.42);
}

TEST(FlowReward, TwoVehicleExamples) {
  EXPECT_DOUBLE_EQ(flow_reward({1.0, 0.0}, {0.0, 0.0}), 0.5);
  EXPECT_DOUBLE_EQ(flow_reward({1.0, 0.0}, {1.0, 1.0}), 0.5);
  // mixed cooperation, by hand: (1 + 0)/1 and (0 + 0.5)/1.5
  EXPECT_NEAR(flow_reward({1.0, 0.0}, {0.0, 0.5}), (1.0 + 1.0 / 3.0) / 2.0, 1e-15);
}

TEST(FlowReward, StaysInUnitInterval) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> k(1, 6);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<double> r, g;
    for (int i = k(rng); i > 0; --i) {
      r.push_back(u(rng));
      g.push_back(u(rng));
    }
    const double x = flow_reward(r, g);
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
  EXPECT_THROW(flow_reward({0.5}, {0.5, 0.5}), InvariantViolation);
}

namespace {

std::vector<Metanode> two_children(double m1, int n1, double m2, int n2, int parent_visits) {
  std::vector<Metanode> t(3);
  t[0].initialized = true;
  t[0].visits = parent_visits;
  t[0].children = {1, 2};
  t[1].visits = n1;
  t[1].total_reward = m1 * n1;
  t[2].visits = n2;
  t[2].total_reward = m2 * n2;
  return t;
}

}  // namespace

TEST(Uct, Values) {
  const double cp = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(uct_value(0.5, 2, 1, cp), 0.5 + std::sqrt(2.0) * std::sqrt(2.0 * std::log(2.0)), 1e-12);
  EXPECT_NEAR(uct_value(0.5, 2, 1, cp), 2.165, 1e-3);
  EXPECT_DOUBLE_EQ(uct_value(0.37, 1, 1, cp), 0.37);
}

TEST(Uct, LessVisitedChildWins) {
  const auto t = two_children(0.9, 2, 0.5, 1, 2);
  EXPECT_EQ(uct_select(t, 0, 1.0 / std::sqrt(2.0)), 2);
}

TEST(Uct, TiesGoToLowestIndex) {
  const auto t = two_children(0.5, 3, 0.5, 3, 6);
  EXPECT_EQ(uct_select(t, 0, 1.0 / std::sqrt(2.0)), 1);
}

TEST(Uct, SingleChild) {
  std::vector<Metanode> t(2);
  t[0].initialized = true;
  t[0].visits = 4;
  t[0].children = {1};
  t[1].visits = 4;
  EXPECT_EQ(uct_select(t, 0, 0.7), 1);
}

TEST(Uct, RequiresFullExpansion) {
  auto t = two_children(0.5, 1, 0.5, 1, 2);
  t[0].untried.push_back({Action::KS});
  EXPECT_THROW(uct_select(t, 0, 0.7), NotFullyExpanded);
  std::vector<Metanode> fresh(1);
  EXPECT_THROW(uct_select(fresh, 0, 0.7), NotFullyExpanded);
}

TEST(Backpropagate, Arithmetic) {
  std::vector<Metanode> t(2);
  backpropagate(t, {0, 1}, 0.7);
  EXPECT_EQ(t[1].visits, 1);
  EXPECT_DOUBLE_EQ(t[1].mean(), 0.7);
  std::vector<Metanode> u(1);
  u[0].visits = 1;
  u[0].total_reward = 0.5;
  backpropagate(u, {0}, 1.0);
  EXPECT_EQ(u[0].visits, 2);
  EXPECT_DOUBLE_EQ(u[0].mean(), 0.75);
  std::vector<Metanode> c(1);
  for (int i = 0; i < 100; ++i) backpropagate(c, {0}, 0.3);
  EXPECT_NEAR(c[0].mean(), 0.3, 1e-15);
}

TEST_F(DecisionTest, RolloutInTargetLaneScoresHigh) {
  MctsSearch s(model(), MctsConfig{});
  FlowState f;
  f.vehicles = {car(1, 100.0, 3.5, 10.0)};
  s.reset(f);
  const double x = s.rollout(0, 1);
  EXPECT_GE(x, 0.9);
  EXPECT_DOUBLE_EQ(s.rollout(0, 1), x);
}

TEST_F(DecisionTest, TerminalByDistanceTakesNoSteps) {
  MctsSearch s(model(), MctsConfig{});
  FlowState f;
  f.vehicles = {car(1, 100.0, 3.5, 10.0)};
  f.vehicles[0].target_progress = 25.0;
  s.reset(f);
  // completed at the root: padded KS chain, every term maximal
  EXPECT_DOUBLE_EQ(s.rollout(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.rollout(0, 9), 1.0);
}

TEST_F(DecisionTest, SearchKeepsSpeedInTargetLane) {
  MctsSearch s(model(), MctsConfig{});
  FlowState f;
  f.vehicles = {car(1, 100.0, 3.5, 10.0)};
  const auto out = s.search(f);
  ASSERT_EQ(out.sequences.size(), 1u);
  EXPECT_EQ(out.sequences[0].size(), 7u);
  EXPECT_GE(std::count(out.sequences[0].begin(), out.sequences[0].end(), Action::KS), 4);
  EXPECT_FALSE(out.emergency);
}

TEST_F(DecisionTest, EmergencyWhenRootIsBlocked) {
  FlowState f;
  // boxed in on a one-lane road, a stopped car ahead inside braking distance
  road = oracle::straight_road(1);
  f.vehicles = {car(1, 100.0, 0.0, 15.0), car(2, 107.0, 0.0, 0.0, false), car(3, 93.0, 0.0, 15.0, false)};
  MctsSearch s(model(), MctsConfig{});
  const auto out = s.search(f);
  EXPECT_TRUE(out.emergency);
  EXPECT_EQ(out.sequences[0], std::vector<Action>(7, Action::DC));
  EXPECT_EQ(out.stats.expanded_nodes, 1);
}

class FixtureSearch : public ::testing::Test {
 protected:
  DecisionOutput run(const std::string& name, std::uint64_t seed, Scenario& sc) {
    sc = load_scenario_file(kData + "/scenarios/" + name + ".json");
    MctsConfig cfg;
    cfg.seed = seed;
    MctsSearch s(flow_model(sc), cfg);
    return s.search(initial_flow(sc));
  }
};

TEST_F(FixtureSearch, TwoVehicleFreewayCompletes) {
  Scenario sc;
  const auto out = run("freeway_2av", 0, sc);
  const FlowModel m = flow_model(sc);
  EXPECT_LT(out.stats.expanded_nodes, 3000);
  ASSERT_EQ(out.chain.size(), 8u);
  for (std::size_t k = 0; k < out.vehicle_ids.size(); ++k) {
    const auto& v = out.chain.back().vehicle(out.vehicle_ids[k]);
    EXPECT_TRUE(m.in_lane(v.state.d, v.target_lane)) << "vehicle " << v.id;
  }
}

TEST_F(FixtureSearch, ExtractedChainReplaysCleanly) {
  for (const char* name : {"freeway_2av", "freeway_3av", "ramp_case1"}) {
    Scenario sc;
    const auto out = run(name, 3, sc);
    const FlowModel m = flow_model(sc);
    for (std::size_t t = 0; t + 1 < out.chain.size(); ++t) {
      const FlowState& f = out.chain[t];
      JointAction joint;
      for (const auto& seq : out.sequences) joint.push_back(seq[t]);
      const auto valid = m.valid_joint_actions(f, m.action_sets(f));
      EXPECT_NE(std::find(valid.begin(), valid.end(), joint), valid.end()) << name << " step " << t;
      const FlowState next = m.successor(f, joint);
      for (std::size_t i = 0; i < next.vehicles.size(); ++i) {
        EXPECT_DOUBLE_EQ(next.vehicles[i].state.s, out.chain[t + 1].vehicles[i].state.s);
        EXPECT_DOUBLE_EQ(next.vehicles[i].state.d, out.chain[t + 1].vehicles[i].state.d);
      }
    }
  }
}

TEST_F(FixtureSearch, Deterministic) {
  Scenario sc;
  const std::string a = serialize_decision(run("freeway_3av", 11, sc));
  const std::string b = serialize_decision(run("freeway_3av", 11, sc));
  EXPECT_EQ(a, b);
}

TEST_F(FixtureSearch, VisitCountsAreMonotone) {
  const Scenario sc = load_scenario_file(kData + "/scenarios/freeway_2av.json");
  MctsSearch s(flow_model(sc), MctsConfig{});
  s.search(initial_flow(sc));
  for (const auto& n : s.tree()) {
    int sum = 0;
    for (int c : n.children) sum += s.tree()[static_cast<std::size_t>(c)].visits;
    EXPECT_GE(n.visits, sum);
    EXPECT_GE(n.mean(), 0.0);
    EXPECT_LE(n.mean(), 1.0);
  }
}

TEST_F(FixtureSearch, SerializeRoundTrip) {
  Scenario sc;
  const auto out = run("freeway_2av", 1, sc);
  const std::string text = serialize_decision(out);
  const auto back = parse_decision(text);
  EXPECT_EQ(back.vehicle_ids, out.vehicle_ids);
  EXPECT_EQ(back.sequences, out.sequences);
  EXPECT_EQ(back.stats.expanded_nodes, out.stats.expanded_nodes);
  EXPECT_EQ(serialize_decision(back), text);
  EXPECT_THROW(parse_decision("{\"emergency\": 1"), SchemaError);
}

TEST(Signals, Annotations) {
  EXPECT_EQ(signal_annotation(Action::LCL), "left turn signal");
  EXPECT_EQ(signal_annotation(Action::LCR), "right turn signal");
  EXPECT_EQ(signal_annotation(Action::DC), "brake light");
  EXPECT_EQ(signal_annotation(Action::KS), "");
}

TEST(CooperationFactor, SelfishMergerDoesNotHelpTheOther) {
  Scenario sc = load_scenario_file(kData + "/scenarios/merge_2av.json");
  const FlowModel m = flow_model(sc);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MctsConfig cfg;
    cfg.seed = seed;
    FlowState f = initial_flow(sc);
    f.vehicles[0].gamma = 0.9;
    const auto coop = MctsSearch(m, cfg).search(f);
    f.vehicles[0].gamma = 0.1;
    const auto selfish = MctsSearch(m, cfg).search(f);
    const int other_target = f.vehicles[1].target_lane;
    EXPECT_LE(chain_reward(m, selfish, 1, other_target), chain_reward(m, coop, 1, other_target) + 1e-12)
        << "seed " << seed;
  }
}
