#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = MVPLAN_CLI;
const std::string kScenarios = std::string(MVPLAN_DATA_DIR) + "/scenarios/";

struct Result {
  int code = -1;
  std::string output;
};

Result cli(const std::string& args) {
  Result r;
  const std::string cmd = kCli + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe) != nullptr) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  fs::path dir;
  void SetUp() override {
    dir = fs::temp_directory_path() / ("mvplan_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
};

}  // namespace

TEST_F(CliTest, MissingScenarioNamesThePath) {
  const auto r = cli("decide --scenario /nonexistent/road.json");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.output.find("/nonexistent/road.json"), std::string::npos) << r.output;
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("simulate").code, 2);
  EXPECT_EQ(cli("simulate --scenario x.json --mode turbo").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(CliTest, DecideTwoVehicles) {
  const auto a = cli("decide --scenario " + kScenarios + "freeway_2av.json --seed 3");
  ASSERT_EQ(a.code, 0) << a.output;
  const auto doc = nlohmann::json::parse(a.output);
  ASSERT_EQ(doc["vehicles"].size(), 2u);
  for (const auto& v : doc["vehicles"]) {
    EXPECT_EQ(v["actions"].size(), 7u);
    for (std::size_t i = 0; i < v["actions"].size(); ++i) {
      if (v["actions"][i] == "LCL") EXPECT_EQ(v["signals"][i], "left turn signal");
    }
  }
  EXPECT_GT(doc["expanded_nodes"].get<int>(), 1);
  EXPECT_EQ(cli("decide --scenario " + kScenarios + "freeway_2av.json --seed 3").output, a.output);
}

TEST_F(CliTest, SimulateWritesArtifacts) {
  const auto r = cli("simulate --scenario " + kScenarios + "single_vehicle.json --seeds 0,1 --mode decision-only --plot --out " +
                     dir.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto agg = nlohmann::json::parse(slurp(dir / "single_vehicle_aggregate.json"));
  EXPECT_EQ(agg["runs"], 2);
  EXPECT_GE(agg["success_rate"].get<double>(), 0.0);
  EXPECT_LE(agg["success_rate"].get<double>(), 1.0);
  EXPECT_EQ(agg["mode"], "decision-only");
  const auto m = nlohmann::json::parse(slurp(dir / "single_vehicle_seed1_metrics.json"));
  EXPECT_EQ(m["mode"], "decision-only");
  EXPECT_TRUE(fs::exists(dir / "single_vehicle_seed0.csv"));
  EXPECT_NE(slurp(dir / "single_vehicle_seed0.svg").find("<svg"), std::string::npos);

  const auto again = cli("metrics --scenario " + kScenarios + "single_vehicle.json --log " +
                         (dir / "single_vehicle_seed0.csv").string() + " --mode decision-only");
  ASSERT_EQ(again.code, 0) << again.output;
  EXPECT_NE(again.output.find("\"success\""), std::string::npos);
}

TEST_F(CliTest, PlanLaneChange) {
  const auto r = cli("plan --scenario " + kScenarios + "single_vehicle.json --vehicle 1 --actions LCR,LCR");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("t,"), std::string::npos);
  EXPECT_EQ(cli("plan --scenario " + kScenarios + "single_vehicle.json --vehicle 1 --actions JUMP").code, 3);
  EXPECT_EQ(cli("plan --scenario " + kScenarios + "single_vehicle.json --vehicle 9 --actions KS").code, 3);
}

TEST_F(CliTest, MalformedLog) {
  std::ofstream(dir / "bad.csv") << "tick,vehicle_id\n1,two\n";
  const auto r = cli("plot --scenario " + kScenarios + "single_vehicle.json --log " + (dir / "bad.csv").string() +
                     " --out " + (dir / "x.svg").string());
  EXPECT_NE(r.code, 0);
}
