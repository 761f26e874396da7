// Runs every acceptance check and prints one PASS/FAIL line per criterion.
// Exit status is 0 only when every line passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flow_oracle.hpp"
#include "mvplan/decision.hpp"
#include "mvplan/geometry.hpp"
#include "mvplan/planner.hpp"
#include "mvplan/simloop.hpp"

using namespace mvplan;

namespace {

const std::string kData = MVPLAN_DATA_DIR;
constexpr double kInf = std::numeric_limits<double>::infinity();

Scenario fixture(const std::string& name) { return load_scenario_file(kData + "/scenarios/" + name + ".json"); }

struct Check {
  bool pass = true;
  std::ostringstream note;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) note << "failed: ";
      else note << "; ";
      note << what;
      pass = false;
    }
  }
};

struct Run {
  Metrics metrics;
  double seconds = 0.0;
  SimLog log;
};

Run timed_run(const Scenario& sc, std::uint64_t seed, SimMode mode) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.mode = mode;
  const auto t0 = std::chrono::steady_clock::now();
  Run r;
  r.log = run(sc, default_weight_set(), cfg);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.metrics = compute_metrics(r.log);
  return r;
}

const std::vector<std::string> kFreeway{"freeway_2av", "freeway_3av", "freeway_4av"};
constexpr int kSeeds = 10;

struct FreewayResults {
  std::vector<Run> full;
  std::vector<Run> decision_only;
};

FreewayResults run_freeway() {
  FreewayResults out;
  for (const auto& name : kFreeway) {
    const Scenario sc = fixture(name);
    for (int seed = 0; seed < kSeeds; ++seed) {
      out.full.push_back(timed_run(sc, seed, SimMode::Full));
      out.full.back().log = {};
      out.decision_only.push_back(timed_run(sc, seed, SimMode::DecisionOnly));
      out.decision_only.back().log = {};
    }
  }
  return out;
}

Check criterion1(const FreewayResults& fr) {
  Check c;
  int ok = 0;
  double slowest = 0.0;
  for (std::size_t i = 0; i < fr.full.size(); ++i) {
    const auto& r = fr.full[i];
    ok += r.metrics.success;
    slowest = std::max(slowest, r.seconds);
    const std::string tag = kFreeway[i / kSeeds] + " seed " + std::to_string(i % kSeeds);
    c.require(r.metrics.success, tag + " not successful");
    if (r.metrics.avg_finish_time) c.require(*r.metrics.avg_finish_time < 30.0, tag + " finish time over 30 s");
  }
  c.require(slowest < 60.0, "a run took over 60 s");
  c.note << (c.pass ? "" : "; ") << ok << "/" << fr.full.size() << " successful, slowest run " << slowest << " s";
  return c;
}

Check criterion2(const FreewayResults& fr) {
  Check c;
  double full_min = kInf, dec_min = kInf;
  for (const auto& r : fr.full) full_min = std::min(full_min, r.metrics.min_distance.value_or(-1.0));
  for (const auto& r : fr.decision_only) dec_min = std::min(dec_min, r.metrics.min_distance.value_or(-1.0));
  c.require(full_min >= 9.0, "full-mode minimum below 9 m");
  c.require(dec_min >= 7.0, "decision-only minimum below 7 m");
  c.note << (c.pass ? "" : "; ") << "min distance full " << full_min << " m, decision-only " << dec_min << " m";
  return c;
}

Check criterion3(const FreewayResults& fr) {
  Check c;
  double total = 0.0;
  for (const auto& r : fr.full) total += r.metrics.avg_expanded_nodes;
  const double avg = total / static_cast<double>(fr.full.size());
  c.require(avg < 3000.0, "average metanodes not below 3000");

  const Scenario sc = fixture("freeway_2av");
  const FlowState root = initial_flow(sc);
  MctsConfig pruned;
  MctsConfig brute;
  brute.pruning = false;
  const auto a = MctsSearch(flow_model(sc), pruned).search(root).stats;
  const auto b = MctsSearch(flow_model(sc), brute).search(root).stats;
  c.require(a.expanded_nodes < b.expanded_nodes, "pruning did not reduce expanded nodes");
  c.require(a.root_combinations < b.root_combinations, "pruning did not reduce root combinations");
  c.note << (c.pass ? "" : "; ") << "avg metanodes " << avg << "; 2-AV root combinations " << a.root_combinations
         << " vs " << b.root_combinations << ", nodes " << a.expanded_nodes << " vs " << b.expanded_nodes;
  return c;
}

Check criterion4() {
  Check c;
  const Road road = oracle::straight_road(4);
  const FlowModel model{&road};
  std::mt19937_64 rng(4);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const FlowState f = oracle::random_flow(rng, road, 3);
    auto got = model.valid_joint_actions(f, model.action_sets(f));
    std::sort(got.begin(), got.end());
    if (got != oracle::brute_force_valid(model, f)) ++mismatches;
  }
  c.require(mismatches == 0, std::to_string(mismatches) + " flows differ from brute force");
  c.note << (c.pass ? "" : "; ") << "200 flows, " << mismatches << " mismatches";
  return c;
}

Check criterion5() {
  Check c;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> k(1, 8);
  int outside = 0, collapse = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> r, g;
    for (int i = k(rng); i > 0; --i) {
      r.push_back(u(rng));
      g.push_back(u(rng));
    }
    const double x = flow_reward(r, g);
    if (!(x >= 0.0 && x <= 1.0)) ++outside;
    if (flow_reward({r[0]}, {g[0]}) != r[0]) ++collapse;
  }
  c.require(outside == 0, std::to_string(outside) + " rewards outside [0,1]");
  c.require(collapse == 0, "K=1 does not collapse to the vehicle reward");
  c.require(std::abs(flow_reward({1.0, 0.0}, {0.0, 0.0}) - 0.5) <= 1e-12, "egoistic K=2 case");
  c.require(std::abs(flow_reward({1.0, 0.0}, {1.0, 1.0}) - 0.5) <= 1e-12, "cooperative K=2 case");
  c.require(std::abs(flow_reward({1.0, 0.0}, {0.0, 0.5}) - (1.0 + 1.0 / 3.0) / 2.0) <= 1e-12, "mixed K=2 case");
  c.note << (c.pass ? "" : "; ") << "10000 fuzzed inputs, K=2 cases exact";
  return c;
}

Check criterion6() {
  Check c;
  const std::vector<Point2> line{{0.0, 0.0}, {300.0, 0.0}};
  std::vector<Point2> arc;
  for (double a = 0.0; a <= 120.0 + 1e-9; a += 1.0) {
    const double t = a * std::numbers::pi / 180.0;
    arc.push_back({50.0 * std::sin(t), 50.0 - 50.0 * std::cos(t)});
  }
  double worst = 0.0;
  for (const auto& pts : {line, arc}) {
    const ReferencePath path = ReferencePath::build(pts);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> us(1.0, path.length() - 1.0), ud(-5.25, 5.25), uv(0.5, 20.0), ur(-0.5, 0.5);
    for (int i = 0; i < 10000; ++i) {
      const double v = uv(rng);
      const FrenetState f{us(rng), v, ud(rng), ur(rng) * v};
      const auto cart = frenet_to_cartesian(path, f);
      const auto back = frenet_to_cartesian(path, cartesian_to_frenet(path, cart));
      worst = std::max(worst, std::hypot(back.x - cart.x, back.y - cart.y));
    }
  }
  c.require(worst < 1e-6, "round-trip error too large");
  c.note << (c.pass ? "" : "; ") << "20000 states, worst position error " << worst << " m";
  return c;
}

Check criterion7() {
  Check c;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-10.0, 10.0), ut(0.5, 10.0);
  double worst_residual = 0.0, worst_fd = 0.0;
  const auto rel = [](double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); };
  for (int i = 0; i < 1000; ++i) {
    const BoundaryState a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
    const double T = ut(rng);
    const auto q = fit_quintic(a, b, T);
    const auto e0 = eval_quintic(q, 0.0), e1 = eval_quintic(q, T);
    for (double r : {rel(e0.p, a.p), rel(e0.p_dot, a.p_dot), rel(e0.p_ddot, a.p_ddot), rel(e1.p, b.p),
                     rel(e1.p_dot, b.p_dot), rel(e1.p_ddot, b.p_ddot)}) {
      worst_residual = std::max(worst_residual, r);
    }
    if (T < 1.0) continue;
    const double h = 1e-5;
    for (double t = 0.1 * T; t < 0.95 * T; t += 0.1 * T) {
      const auto e = eval_quintic(q, t), lo = eval_quintic(q, t - h), hi = eval_quintic(q, t + h);
      worst_fd = std::max({worst_fd, std::abs(e.p_dot - (hi.p - lo.p) / (2 * h)),
                           std::abs(e.p_ddot - (hi.p_dot - lo.p_dot) / (2 * h)),
                           std::abs(e.p_dddot - (hi.p_ddot - lo.p_ddot) / (2 * h))});
    }
  }
  const auto step = fit_quintic({0, 0, 0}, {1, 0, 0}, 1.0);
  const std::array<double, 6> expect{0, 0, 0, 10, -15, 6};
  double worst_coef = 0.0;
  for (int k = 0; k < 6; ++k) worst_coef = std::max(worst_coef, std::abs(step.c[k] - expect[k]));
  c.require(worst_residual < 1e-9, "boundary residual too large");
  c.require(worst_coef < 1e-9, "minimum-jerk coefficients differ");
  c.require(worst_fd < 1e-6, "derivatives disagree with finite differences");
  c.note << (c.pass ? "" : "; ") << "residual " << worst_residual << ", coefficients " << worst_coef
         << ", finite differences " << worst_fd;
  return c;
}

Check criterion8() {
  Check c;
  const SafetyParams safety;
  const BodyPose ego{0.0, 0.0, 0.0, {}};
  c.require(obstacle_term(ego, 10.0, BodyPose{150.0, 3.5, 0.0, {}}, 10.0, safety, 10.0) == 0.0, "zero branch");
  c.require(obstacle_term(ego, 10.0, BodyPose{3.0, 1.0, 0.3, {}}, 10.0, safety, 10.0) == kInf, "overlap branch");
  // v 20 behind v 15: D_s 25, halfway along both axes
  const double mid = obstacle_term(ego, 20.0, BodyPose{2.5 + 16.25 + 2.5, 3.5, 0.0, {}}, 15.0, safety, 1.0);
  c.require(std::abs(mid - 1.0) <= 1e-12, "inside branch");

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0), speed(0.0, 16.7);
  int broken = 0;
  for (int ray = 0; ray < 1000; ++ray) {
    const double vs = speed(rng), vo = speed(rng);
    const bool along_x = ray % 2 == 0;
    const double fixed = along_x ? 1.5 * u(rng) : 20.0 * u(rng);
    const double sign = u(rng) < 0.0 ? -1.0 : 1.0;
    double prev = -1.0;
    for (double r = 45.0; r >= 0.0; r -= 0.25) {
      const BodyPose other = along_x ? BodyPose{sign * r, fixed, 0.0, {}} : BodyPose{fixed, sign * r, 0.0, {}};
      const double cost = obstacle_term(ego, vs, other, vo, safety, 10.0);
      if (cost < prev) {
        ++broken;
        break;
      }
      prev = cost;
    }
  }
  c.require(broken == 0, std::to_string(broken) + " rays not monotone");
  c.note << (c.pass ? "" : "; ") << "branches exact, 1000 rays, " << broken << " non-monotone";
  return c;
}

Check criterion9() {
  Check c;
  const Scenario sc = fixture("ramp_case3");
  int collisions = 0, recovered = 0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const Run r = timed_run(sc, seed, SimMode::Full);
    collisions += r.metrics.collision;
    const auto finish = finish_times(r.log);
    std::vector<int> controlled;
    for (const auto& v : r.log.vehicles) {
      if (v.controlled) controlled.push_back(v.id);
    }
    // an abort that follows a plan failure, then the aborting vehicle settles afterwards
    bool ok = false;
    int failure_tick = -1;
    for (const auto& e : r.log.events) {
      if (e.kind == "plan_failure" && failure_tick < 0) failure_tick = e.tick;
      if (e.kind != "abort" || failure_tick < 0) continue;
      const auto it = std::find(controlled.begin(), controlled.end(), e.vehicle_id);
      if (it == controlled.end()) continue;
      const auto& f = finish[it - controlled.begin()];
      if (f && *f >= e.tick * r.log.tick - 1e-9) ok = true;
    }
    ok = ok && r.metrics.success;
    recovered += ok;
    c.require(ok, "seed " + std::to_string(seed) + " has no abort followed by completion");
  }
  c.require(collisions == 0, std::to_string(collisions) + " collisions");
  c.note << (c.pass ? "" : "; ") << collisions << " collisions, " << recovered << "/" << kSeeds
         << " seeds abort then complete";
  return c;
}

// sign of (first controlled finish - second controlled finish); 0 when undecided
int completion_order(const SimLog& log) {
  const auto f = finish_times(log);
  if (f.size() < 2 || !f[0] || !f[1] || *f[0] == *f[1]) return 0;
  return *f[0] < *f[1] ? -1 : 1;
}

Check criterion10() {
  Check c;
  const Scenario a = fixture("ramp_case1");
  const Scenario b = fixture("ramp_case2");
  int flips = 0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const int oa = completion_order(timed_run(a, seed, SimMode::Full).log);
    const int ob = completion_order(timed_run(b, seed, SimMode::Full).log);
    flips += oa != 0 && ob != 0 && oa != ob;
  }
  c.require(flips >= 8, "order changed in fewer than 8 seeds");
  c.note << (c.pass ? "" : "; ") << "completion order changed in " << flips << "/" << kSeeds << " seeds";
  return c;
}

Check criterion11() {
  Check c;
  for (const std::string name : {"freeway_3av", "ramp_case3"}) {
    for (SimMode mode : {SimMode::Full, SimMode::DecisionOnly}) {
      const SimLog x = timed_run(fixture(name), 7, mode).log;
      const SimLog y = timed_run(fixture(name), 7, mode).log;
      const bool same = serialize_log_csv(x) == serialize_log_csv(y) &&
                        serialize_events_csv(x) == serialize_events_csv(y) &&
                        serialize_metrics(compute_metrics(x)) == serialize_metrics(compute_metrics(y));
      c.require(same, name + " " + std::string(to_string(mode)) + " differs");
    }
  }
  c.note << (c.pass ? "" : "; ") << "log, events and metrics byte-identical";
  return c;
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int n, const Check& c) {
    std::printf("criterion %2d: %s  %s\n", n, c.pass ? "PASS" : "FAIL", c.note.str().c_str());
    std::fflush(stdout);
    failures += !c.pass;
  };
  const FreewayResults fr = run_freeway();
  report(1, criterion1(fr));
  report(2, criterion2(fr));
  report(3, criterion3(fr));
  report(4, criterion4());
  report(5, criterion5());
  report(6, criterion6());
  report(7, criterion7());
  report(8, criterion8());
  report(9, criterion9());
  report(10, criterion10());
  report(11, criterion11());
  return failures == 0 ? 0 : 1;
}
