#pragma once

#include <string>
#include <vector>

#include "mvplan/model.hpp"
#include "mvplan/simloop.hpp"

namespace mvplan {

/// Static SVG: lane markings and per-vehicle paths on top (controlled in
/// color, uncontrolled in gray), one speed-over-time panel per controlled
/// vehicle below. Throws SchemaError when the rows name unknown vehicles.
std::string render_svg(const Scenario& scenario, const std::vector<TickRecord>& rows, double tick = 0.1);

/// Stroke color of a vehicle in the plot.
std::string vehicle_color(const Scenario& scenario, int vehicle_id);

}  // namespace mvplan
