#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvplan/decision.hpp"
#include "mvplan/errors.hpp"
#include "mvplan/planner.hpp"
#include "mvplan/plot.hpp"
#include "mvplan/scenario_io.hpp"
#include "mvplan/simloop.hpp"

namespace fs = std::filesystem;
using namespace mvplan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitInternal = 4;

// input problems (missing files, schema, invalid scenarios) map to exit 3
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
auto load(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw InputError(what + ": " + e.what());
  }
}

Scenario scenario_from(const std::string& path) {
  if (!fs::exists(path)) throw InputError("scenario file not found: " + path);
  return load(path, [&] { return load_scenario_file(path); });
}

WeightSet weights_from(const std::string& path) {
  if (path.empty()) return default_weight_set();
  if (!fs::exists(path)) throw InputError("weights file not found: " + path);
  return load(path, [&] { return load_weight_set_file(path); });
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--seeds", "not a seed list: " + text);
    }
  }
  if (out.empty()) throw CLI::ValidationError("--seeds", "seed list is empty");
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::vector<Action> parse_actions(const std::string& text) {
  std::vector<Action> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(load("--actions", [&] { return action_from_string(cell); }));
  if (out.empty()) throw CLI::ValidationError("--actions", "action list is empty");
  return out;
}

// rebuilds an in-memory log from a CSV for metric recomputation
SimLog log_from_csv(const Scenario& sc, const std::string& path) {
  if (!fs::exists(path)) throw InputError("log file not found: " + path);
  SimLog log;
  log.rows = load(path, [&] { return parse_log_csv(read_text_file(path)); });
  log.scenario_id = sc.id;
  log.lane_width = sc.road.lane_width;
  log.delta_d = sc.actions.delta_d;
  for (const auto& v : sc.vehicles) {
    log.vehicles.push_back({v.id, v.controlled(), v.geometry, v.target_lane(), std::string(to_string(v.profile.behavior))});
  }
  int last = -1;
  for (const auto& r : log.rows) last = std::max(last, r.tick);
  log.ticks = last + 1;
  std::size_t i = 0;
  while (i < log.rows.size() && !log.collision) {
    std::size_t j = i;
    while (j < log.rows.size() && log.rows[j].tick == log.rows[i].tick) ++j;
    for (std::size_t a = i; a < j && !log.collision; ++a) {
      for (std::size_t b = a + 1; b < j; ++b) {
        const auto& ra = log.rows[a];
        const auto& rb = log.rows[b];
        if (rectangles_overlap({ra.x, ra.y, ra.theta, sc.vehicle(ra.vehicle_id).geometry},
                               {rb.x, rb.y, rb.theta, sc.vehicle(rb.vehicle_id).geometry})) {
          log.collision = true;
          break;
        }
      }
    }
    i = j;
  }
  return log;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-vehicle cooperative decision and trajectory planning"};
  app.require_subcommand(1);

  std::string scenario_path, weights_path, mode = "full", seeds = "0", out_dir = "out", log_path, actions_text;
  std::string out_file;
  bool plot_flag = false;
  std::optional<double> max_duration;
  std::uint64_t seed = 0;
  int vehicle_id = 0;
  int iterations = 3000;

  auto* sim = app.add_subcommand("simulate", "Closed-loop runs over a list of seeds");
  sim->add_option("--scenario", scenario_path, "Scenario file")->required();
  sim->add_option("--weights", weights_path, "Weight set file (defaults to the built-in habits)");
  sim->add_option("--mode", mode, "full or decision-only")->check(CLI::IsMember({"full", "decision-only"}));
  sim->add_option("--seeds", seeds, "Comma-separated seeds");
  sim->add_option("--out", out_dir, "Output directory");
  sim->add_flag("--plot", plot_flag, "Also write an SVG per run");
  sim->add_option("--max-duration", max_duration, "Simulated seconds before giving up");
  sim->add_option("--iterations", iterations, "Search iteration cap");

  auto* decide = app.add_subcommand("decide", "One decision search from the scenario's initial state");
  decide->add_option("--scenario", scenario_path, "Scenario file")->required();
  decide->add_option("--seed", seed, "Search seed");
  decide->add_option("--seeds", seeds, "Seed list (the first one is used)");
  decide->add_option("--iterations", iterations, "Search iteration cap");
  decide->add_option("--out", out_file, "Write the decision document here instead of stdout");

  auto* plan_cmd = app.add_subcommand("plan", "Plan one vehicle's trajectory for an action prefix");
  plan_cmd->add_option("--scenario", scenario_path, "Scenario file")->required();
  plan_cmd->add_option("--weights", weights_path, "Weight set file");
  plan_cmd->add_option("--vehicle", vehicle_id, "Controlled vehicle id")->required();
  plan_cmd->add_option("--actions", actions_text, "Comma-separated action tags, e.g. LCL,LCL")->required();
  plan_cmd->add_option("--out", out_file, "Write the trajectory CSV here instead of stdout");

  auto* metrics = app.add_subcommand("metrics", "Recompute metrics from a log");
  metrics->add_option("--scenario", scenario_path, "Scenario file")->required();
  metrics->add_option("--log", log_path, "Log CSV")->required();
  metrics->add_option("--mode", mode, "Mode tag for the report")->check(CLI::IsMember({"full", "decision-only"}));

  auto* plot_cmd = app.add_subcommand("plot", "Render a log as SVG");
  plot_cmd->add_option("--scenario", scenario_path, "Scenario file")->required();
  plot_cmd->add_option("--log", log_path, "Log CSV")->required();
  plot_cmd->add_option("--out", out_file, "SVG output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return e.get_exit_code() == 0 ? code : kExitUsage;
  }

  try {
    if (*sim) {
      const Scenario sc = scenario_from(scenario_path);
      const WeightSet weights = weights_from(weights_path);
      load("weights", [&] {
        check_weight_references(sc, weights);
        return 0;
      });
      SimConfig cfg;
      cfg.mode = sim_mode_from_string(mode);
      cfg.max_iterations = iterations;
      if (max_duration) cfg.max_duration = *max_duration;
      std::error_code ec;
      fs::create_directories(out_dir, ec);
      if (ec) throw InputError("cannot create " + out_dir + ": " + ec.message());
      std::vector<Metrics> all;
      for (std::uint64_t s : parse_seeds(seeds)) {
        cfg.seed = s;
        const SimLog log = run(sc, weights, cfg);
        const Metrics m = compute_metrics(log);
        const std::string stem = sc.id + "_seed" + std::to_string(s);
        write_file(fs::path(out_dir) / (stem + ".csv"), serialize_log_csv(log));
        write_file(fs::path(out_dir) / (stem + "_events.csv"), serialize_events_csv(log));
        write_file(fs::path(out_dir) / (stem + "_metrics.json"), serialize_metrics(m));
        if (plot_flag) write_file(fs::path(out_dir) / (stem + ".svg"), render_svg(sc, log.rows, log.tick));
        std::cout << stem << ": " << (m.success ? "success" : "failure") << "\n";
        all.push_back(m);
      }
      const std::string agg = serialize_aggregate(aggregate(all));
      write_file(fs::path(out_dir) / (sc.id + "_aggregate.json"), agg);
      std::cout << agg;
      return kExitOk;
    }
    if (*decide) {
      const Scenario sc = scenario_from(scenario_path);
      MctsConfig mc;
      mc.seed = decide->count("--seed") ? seed : parse_seeds(seeds).front();
      mc.max_iterations = iterations;
      MctsSearch search(flow_model(sc), mc);
      const std::string doc = serialize_decision(search.search(initial_flow(sc)));
      if (out_file.empty()) {
        std::cout << doc;
      } else {
        write_file(out_file, doc);
      }
      return kExitOk;
    }
    if (*plan_cmd) {
      const Scenario sc = scenario_from(scenario_path);
      const WeightSet weights = weights_from(weights_path);
      const VehicleSpec& spec = load("--vehicle", [&]() -> const VehicleSpec& { return sc.vehicle(vehicle_id); });
      if (!spec.controlled()) throw InputError("vehicle " + std::to_string(vehicle_id) + " is not controlled");
      const auto it = weights.find(spec.profile.weights_id);
      if (it == weights.end()) throw InputError("unknown weights id " + spec.profile.weights_id);
      const FlowModel fm = flow_model(sc);
      const FlowState flow = initial_flow(sc);
      PlanRequest req;
      req.vehicle_id = spec.id;
      req.geometry = spec.geometry;
      req.start.s = spec.s0;
      req.start.s_dot = spec.v0;
      req.start.d = sc.road.lane_center(spec.lane0);
      req.road = &sc.road;
      req.actions = sc.actions;
      req.safety = sc.safety;
      req.weights = it->second;
      req.limits = KinematicLimits::for_road(sc.road);
      DecisionState nominal = flow.vehicle(spec.id).state;
      for (Action a : parse_actions(actions_text)) {
        nominal = apply_action(nominal, a, sc.actions, sc.road.speed_limit);
        req.segments.push_back({a, sc.actions.dt, nominal.d});
      }
      TrafficSnapshot snap;
      snap.road = &sc.road;
      snap.delta_d = sc.actions.delta_d;
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
      const double horizon = sc.actions.dt * static_cast<double>(req.segments.size());
      for (const auto& v : flow.vehicles) {
        if (v.id != spec.id) req.predictions.push_back(predict_uncontrolled(v.id, snap, horizon));
      }
      const PlanResult res = plan(req);
      if (!res.ok()) {
        std::cout << "{\"plan_failure\": {\"segment\": " << *res.failed_segment << "}}\n";
        return kExitOk;
      }
      std::ostringstream csv;
      csv << "t,s,d,x,y,v,theta,kappa,a,jerk\n";
      csv.setf(std::ios::fixed);
      csv.precision(6);
      for (const auto& p : res.points) {
        csv << p.t << "," << p.s << "," << p.d << "," << p.x << "," << p.y << "," << p.v << "," << p.theta << ","
            << p.kappa << "," << p.s_ddot << "," << p.s_dddot << "\n";
      }
      if (out_file.empty()) {
        std::cout << csv.str();
      } else {
        write_file(out_file, csv.str());
      }
      return kExitOk;
    }
    if (*metrics) {
      const Scenario sc = scenario_from(scenario_path);
      SimLog log = log_from_csv(sc, log_path);
      log.mode = sim_mode_from_string(mode);
      std::cout << serialize_metrics(compute_metrics(log));
      return kExitOk;
    }
    if (*plot_cmd) {
      const Scenario sc = scenario_from(scenario_path);
      const SimLog log = log_from_csv(sc, log_path);
      const std::string svg = load(log_path, [&] { return render_svg(sc, log.rows); });
      write_file(out_file, svg);
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
