#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "mvplan/model.hpp"

namespace mvplan {

/// Per-term trajectory cost weights of one driving habit.
struct WeightVector {
  double w_cur = 1.0;
  double w_phi = 1.0;
  double w_out = 1.0;
  double w_acc = 1.0;
  double w_jerk = 1.0;
  double w_obs = 1.0;

  bool operator==(const WeightVector&) const = default;
};

using WeightSet = std::map<std::string, WeightVector, std::less<>>;

/// aggressive / normal / conservative habit weights; unlisted terms at 1.0.
WeightSet default_weight_set();

/// Parses a scenario document (JSON). Unknown fields are rejected.
/// Throws SchemaError (message starts with the offending field path) or
/// InvariantViolation.
Scenario load_scenario(std::string_view text);
Scenario load_scenario_file(const std::filesystem::path& path);
std::string serialize_scenario(const Scenario& scenario);

WeightSet load_weight_set(std::string_view text);
WeightSet load_weight_set_file(const std::filesystem::path& path);
std::string serialize_weight_set(const WeightSet& weights);

/// Throws SchemaError when a vehicle references an id missing from `weights`.
void check_weight_references(const Scenario& scenario, const WeightSet& weights);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace mvplan
