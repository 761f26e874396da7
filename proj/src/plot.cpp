#include "mvplan/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "mvplan/errors.hpp"

namespace mvplan {

namespace {

constexpr const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
constexpr const char* kGray = "#9a9a9a";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Box {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  void add(double x, double y) {
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
  }
};

}  // namespace

std::string vehicle_color(const Scenario& scenario, int vehicle_id) {
  const VehicleSpec& v = scenario.vehicle(vehicle_id);
  if (!v.controlled()) return kGray;
  const auto ids = scenario.controlled_ids();
  const auto pos = std::find(ids.begin(), ids.end(), vehicle_id) - ids.begin();
  return kPalette[pos % std::size(kPalette)];
}

std::string render_svg(const Scenario& sc, const std::vector<TickRecord>& rows, double tick) {
  const Road& road = sc.road;
  std::map<int, std::vector<const TickRecord*>> tracks;
  for (const auto& r : rows) {
    sc.vehicle(r.vehicle_id);
    tracks[r.vehicle_id].push_back(&r);
  }

  // lane markings: boundaries at every half lane width off the lane centers
  std::vector<std::vector<Point2>> marks;
  const double step = 2.0;
  for (int b = 0; b <= road.lanes; ++b) {
    const double d = road.lane_center(b) - 0.5 * road.lane_width;
    double s_end = road.reference.length();
    if (road.ramp && b == road.lanes) s_end = road.ramp->merge_end_s;
    std::vector<Point2> line;
    for (double s = 0.0; s <= s_end + 1e-9; s += step) {
      const CartesianState c = frenet_to_cartesian(road.reference, {std::min(s, s_end), 0.0, d, 0.0});
      line.push_back({c.x, c.y});
    }
    marks.push_back(std::move(line));
  }

  Box box;
  for (const auto& [id, t] : tracks) {
    for (const auto* r : t) box.add(r->x, r->y);
  }
  if (tracks.empty()) {
    for (const auto& m : marks) {
      for (const auto& p : m) box.add(p.x, p.y);
    }
  }
  const double margin = 10.0;
  box.x0 -= margin;
  box.x1 += margin;
  box.y0 -= margin;
  box.y1 += margin;

  const double width = 1000.0;
  const double scale = width / std::max(box.x1 - box.x0, 1.0);
  const double top_h = std::max(120.0, (box.y1 - box.y0) * scale);
  const auto ctrl = sc.controlled_ids();
  const double panel_h = 120.0;
  const double height = top_h + 20.0 + panel_h * static_cast<double>(ctrl.size());

  auto px = [&](double x) { return (x - box.x0) * scale; };
  auto py = [&](double y) { return (y - box.y0) * scale; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
                    "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t b = 0; b < marks.size(); ++b) {
    const bool edge = b == 0 || b + 1 == marks.size();
    std::string pts;
    for (const auto& p : marks[b]) {
      if (p.x < box.x0 || p.x > box.x1) continue;
      pts += num(px(p.x)) + "," + num(py(p.y)) + " ";
    }
    if (pts.empty()) continue;
    svg += "<polyline class=\"lane\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"" +
           std::string(edge ? "" : " stroke-dasharray=\"6,6\"") + " points=\"" + pts + "\"/>\n";
  }
  if (road.ramp) {
    const CartesianState end = frenet_to_cartesian(
        road.reference, {road.ramp->merge_end_s, 0.0, road.lane_center(road.ramp->merge_lane), 0.0});
    svg += "<circle class=\"merge-end\" cx=\"" + num(px(end.x)) + "\" cy=\"" + num(py(end.y)) +
           "\" r=\"4\" fill=\"#444\"/>\n";
  }
  for (const auto& [id, t] : tracks) {
    std::string pts;
    for (const auto* r : t) pts += num(px(r->x)) + "," + num(py(r->y)) + " ";
    const bool c = sc.vehicle(id).controlled();
    svg += "<polyline class=\"" + std::string(c ? "controlled" : "uncontrolled") + "\" data-id=\"" +
           std::to_string(id) + "\" fill=\"none\" stroke=\"" + vehicle_color(sc, id) + "\" stroke-width=\"2\" points=\"" +
           pts + "\"/>\n";
  }

  // speed panels
  double t_max = 0.0, v_max = 1.0;
  for (int id : ctrl) {
    if (!tracks.count(id)) continue;
    for (const auto* r : tracks[id]) {
      t_max = std::max(t_max, r->tick * tick);
      v_max = std::max(v_max, r->v);
    }
  }
  t_max = std::max(t_max, tick);
  for (std::size_t i = 0; i < ctrl.size(); ++i) {
    const double y0 = top_h + 20.0 + panel_h * static_cast<double>(i);
    svg += "<rect x=\"40\" y=\"" + num(y0) + "\" width=\"" + num(width - 60.0) + "\" height=\"" + num(panel_h - 20.0) +
           "\" fill=\"none\" stroke=\"#ccc\"/>\n";
    svg += "<text x=\"4\" y=\"" + num(y0 + 14.0) + "\" font-size=\"11\">v" + std::to_string(ctrl[i]) + "</text>\n";
    if (!tracks.count(ctrl[i])) continue;
    std::string pts;
    for (const auto* r : tracks[ctrl[i]]) {
      const double x = 40.0 + (width - 60.0) * (r->tick * tick) / t_max;
      const double y = y0 + (panel_h - 20.0) * (1.0 - r->v / v_max);
      pts += num(x) + "," + num(y) + " ";
    }
    svg += "<polyline class=\"speed\" data-id=\"" + std::to_string(ctrl[i]) + "\" fill=\"none\" stroke=\"" +
           vehicle_color(sc, ctrl[i]) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace mvplan
