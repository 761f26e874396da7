#include <gtest/gtest.h>

#include <string>

#include "mvplan/errors.hpp"
#include "mvplan/scenario_io.hpp"

using namespace mvplan;

namespace {

const std::string kData = MVPLAN_DATA_DIR;

std::string small_doc(const std::string& vehicles, const std::string& extra_road = "") {
  return R"({"id":"t","road":{"lanes":4,"lane_width":3.5,"speed_limit":16.7,"length":500.0)" + extra_road +
         R"(},"vehicles":[)" + vehicles + "]}";
}

const std::string kCar = R"({"id":1,"role":"controlled","behavior":"normal","target_lane":1,"s0":10,"lane0":0,"v0":10})";

template <typename E>
std::string message_of(const std::string& doc) {
  try {
    load_scenario(doc);
  } catch (const E& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ScenarioIo, FreewayFile) {
  const Scenario sc = load_scenario_file(kData + "/scenarios/freeway_3av.json");
  EXPECT_EQ(sc.vehicles.size(), 5u);
  EXPECT_EQ(sc.road.lane_paths.size(), 4u);
  EXPECT_EQ(sc.controlled_ids(), (std::vector<int>{1, 2, 3}));
  EXPECT_FALSE(sc.road.ramp.has_value());
  EXPECT_DOUBLE_EQ(sc.safety.tau, 0.5);
  EXPECT_DOUBLE_EQ(sc.actions.dt, 1.5);
}

TEST(ScenarioIo, RampCarriedThrough) {
  const Scenario sc = load_scenario_file(kData + "/scenarios/ramp_case1.json");
  ASSERT_TRUE(sc.road.ramp.has_value());
  EXPECT_EQ(sc.road.ramp->merge_lane, 3);
  EXPECT_DOUBLE_EQ(sc.road.ramp->merge_end_s, 200.0);
}

TEST(ScenarioIo, RoundTripIsStable) {
  for (const char* name : {"freeway_2av", "freeway_4av", "ramp_case2", "ramp_case3"}) {
    const Scenario a = load_scenario_file(kData + "/scenarios/" + name + ".json");
    const std::string text = serialize_scenario(a);
    const Scenario b = load_scenario(text);
    EXPECT_EQ(serialize_scenario(b), text) << name;
    ASSERT_EQ(a.vehicles.size(), b.vehicles.size());
    for (std::size_t i = 0; i < a.vehicles.size(); ++i) {
      EXPECT_EQ(a.vehicles[i].id, b.vehicles[i].id);
      EXPECT_EQ(a.vehicles[i].s0, b.vehicles[i].s0);
      EXPECT_EQ(a.vehicles[i].profile.gamma, b.vehicles[i].profile.gamma);
      EXPECT_EQ(a.vehicles[i].script.size(), b.vehicles[i].script.size());
    }
  }
}

TEST(ScenarioIo, DefaultsFromBehavior) {
  const Scenario sc = load_scenario(small_doc(kCar));
  EXPECT_DOUBLE_EQ(sc.vehicles[0].profile.gamma, 0.5);
  EXPECT_EQ(sc.vehicles[0].profile.weights_id, "normal");
}

TEST(ScenarioIo, UnknownFieldNamesPath) {
  const std::string bad = R"({"id":1,"role":"controlled","target_lane":1,"s0":10,"lane0":0,"v0":10,"colour":"red"})";
  const std::string msg = message_of<SchemaError>(small_doc(bad));
  EXPECT_NE(msg.find("colour"), std::string::npos) << msg;
  EXPECT_NE(msg.find("vehicles"), std::string::npos) << msg;
}

TEST(ScenarioIo, MalformedJson) { EXPECT_THROW(load_scenario("{\"id\":"), SchemaError); }

TEST(ScenarioIo, WrongType) { EXPECT_THROW(load_scenario(small_doc(kCar, R"(,"lanes":"four")")), SchemaError); }

TEST(ScenarioIo, OverlappingVehicles) {
  const std::string other = R"({"id":2,"role":"uncontrolled","s0":12,"lane0":0,"v0":10})";
  const std::string msg = message_of<InvariantViolation>(small_doc(kCar + "," + other));
  EXPECT_NE(msg.find("overlapping"), std::string::npos) << msg;
}

TEST(ScenarioIo, DuplicateId) {
  const std::string other = R"({"id":1,"role":"uncontrolled","s0":80,"lane0":2,"v0":10})";
  EXPECT_THROW(load_scenario(small_doc(kCar + "," + other)), InvariantViolation);
}

TEST(ScenarioIo, ControlledNeedsTarget) {
  EXPECT_THROW(load_scenario(small_doc(R"({"id":1,"role":"controlled","s0":10,"lane0":0,"v0":10})")),
               InvariantViolation);
}

TEST(ScenarioIo, GammaRange) {
  EXPECT_THROW(
      load_scenario(small_doc(R"({"id":1,"role":"controlled","gamma":1.5,"target_lane":1,"s0":10,"lane0":0,"v0":10})")),
      InvariantViolation);
}

TEST(WeightSet, DefaultFileMatchesBuiltIn) {
  const WeightSet w = load_weight_set_file(kData + "/weights/default.json");
  EXPECT_EQ(w, default_weight_set());
  EXPECT_EQ(load_weight_set(serialize_weight_set(w)), w);
}

TEST(WeightSet, UnknownReference) {
  Scenario sc = load_scenario(small_doc(kCar));
  sc.vehicles[0].profile.weights_id = "sporty";
  EXPECT_THROW(check_weight_references(sc, default_weight_set()), SchemaError);
}
