#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <string>
#include <vector>

#include "mvplan/decision.hpp"
#include "mvplan/errors.hpp"
#include "mvplan/geometry.hpp"
#include "mvplan/scenario_io.hpp"
#include "mvplan/simloop.hpp"

namespace py = pybind11;
using namespace mvplan;

namespace {

Scenario scenario_arg(const std::string& text_or_path) {
  // JSON text starts with a brace; anything else is a path
  const auto first = text_or_path.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text_or_path[first] == '{') return load_scenario(text_or_path);
  return load_scenario_file(text_or_path);
}

WeightSet weights_arg(const std::string& path) { return path.empty() ? default_weight_set() : load_weight_set_file(path); }

py::dict simulate(const std::string& scenario, std::uint64_t seed, const std::string& mode, const std::string& weights,
                  double max_duration) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.mode = sim_mode_from_string(mode);
  cfg.max_duration = max_duration;
  const Scenario sc = scenario_arg(scenario);
  const WeightSet ws = weights_arg(weights);
  check_weight_references(sc, ws);
  SimLog log;
  {
    py::gil_scoped_release release;
    log = run(sc, ws, cfg);
  }
  py::dict out;
  out["metrics"] = serialize_metrics(compute_metrics(log));
  out["log_csv"] = serialize_log_csv(log);
  out["events_csv"] = serialize_events_csv(log);
  return out;
}

std::string decide(const std::string& scenario, std::uint64_t seed, int iterations, bool pruning) {
  const Scenario sc = scenario_arg(scenario);
  MctsConfig mc;
  mc.seed = seed;
  mc.max_iterations = iterations;
  mc.pruning = pruning;
  py::gil_scoped_release release;
  MctsSearch search(flow_model(sc), mc);
  return serialize_decision(search.search(initial_flow(sc)));
}

}  // namespace

PYBIND11_MODULE(_mvplan, m) {
  m.doc() = "Multi-vehicle cooperative decision and trajectory planning";

  static py::exception<Error> base(m, "MvplanError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      base(e.what());
    }
  });

  m.def("simulate", &simulate, py::arg("scenario"), py::arg("seed") = 0, py::arg("mode") = "full",
        py::arg("weights") = "", py::arg("max_duration") = 30.0);
  m.def("decide", &decide, py::arg("scenario"), py::arg("seed") = 0, py::arg("iterations") = 3000,
        py::arg("pruning") = true);
  m.def("normalize_scenario", [](const std::string& s) { return serialize_scenario(scenario_arg(s)); },
        py::arg("scenario"));
  m.def("default_weights", [] { return serialize_weight_set(default_weight_set()); });

  m.def("flow_reward", &flow_reward, py::arg("rewards"), py::arg("gammas"));

  m.def(
      "fit_quintic",
      [](std::array<double, 3> start, std::array<double, 3> end, double duration) {
        const auto q = fit_quintic({start[0], start[1], start[2]}, {end[0], end[1], end[2]}, duration);
        return std::vector<double>(q.c.begin(), q.c.end());
      },
      py::arg("start"), py::arg("end"), py::arg("duration"));

  py::class_<ReferencePath>(m, "ReferencePath")
      .def(py::init([](const std::vector<std::array<double, 2>>& pts) {
             std::vector<Point2> w;
             for (const auto& p : pts) w.push_back({p[0], p[1]});
             return ReferencePath::build(w);
           }),
           py::arg("waypoints"))
      .def_property_readonly("length", &ReferencePath::length)
      .def(
          "to_cartesian",
          [](const ReferencePath& path, double s, double d, double s_dot, double d_dot) {
            const auto c = frenet_to_cartesian(path, {s, s_dot, d, d_dot});
            return py::make_tuple(c.x, c.y, c.v, c.theta);
          },
          py::arg("s"), py::arg("d"), py::arg("s_dot") = 0.0, py::arg("d_dot") = 0.0)
      .def(
          "to_frenet",
          [](const ReferencePath& path, double x, double y, double v, double theta) {
            const auto f = cartesian_to_frenet(path, {x, y, v, theta});
            return py::make_tuple(f.s, f.d, f.s_dot, f.d_dot);
          },
          py::arg("x"), py::arg("y"), py::arg("v") = 0.0, py::arg("theta") = 0.0);
}
