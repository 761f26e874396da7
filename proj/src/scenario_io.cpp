#include "mvplan/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mvplan/errors.hpp"

namespace mvplan {

namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

  void allow_only(std::initializer_list<std::string_view> keys) const {
    if (!node_.is_object()) fail("", "expected an object");
    for (const auto& [key, _] : node_.items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) fail(key, "unknown field");
    }
  }

  bool has(std::string_view key) const { return node_.contains(key) && !node_.at(std::string(key)).is_null(); }

  double number(std::string_view key) const {
    if (!has(key)) fail(key, "missing required field");
    const json& v = node_.at(std::string(key));
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }
  double number_or(std::string_view key, double fallback) const { return has(key) ? number(key) : fallback; }

  int integer(std::string_view key) const {
    if (!has(key)) fail(key, "missing required field");
    const json& v = node_.at(std::string(key));
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }

  std::string string(std::string_view key) const {
    if (!has(key)) fail(key, "missing required field");
    const json& v = node_.at(std::string(key));
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  Reader child(std::string_view key) const {
    if (!has(key)) fail(key, "missing required field");
    return {node_.at(std::string(key)), field(key)};
  }

  const json& raw(std::string_view key) const { return node_.at(std::string(key)); }
  std::string field(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  [[noreturn]] void fail(std::string_view key, const std::string& what) const {
    const std::string where = key.empty() ? (path_.empty() ? "<root>" : path_) : field(key);
    throw SchemaError(where + ": " + what);
  }

 private:
  const json& node_;
  std::string path_;
};

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("<root>: malformed document: ") + e.what());
  }
}

template <typename T, typename F>
T parse_enum(const Reader& r, std::string_view key, F&& convert) {
  const std::string s = r.string(key);
  try {
    return convert(s);
  } catch (const SchemaError& e) {
    r.fail(key, e.what());
  }
}

void validate(const Scenario& sc) {
  const Road& road = sc.road;
  std::set<int> ids;
  const int main_lanes = road.ramp ? road.lanes - 1 : road.lanes;
  for (std::size_t i = 0; i < sc.vehicles.size(); ++i) {
    const VehicleSpec& v = sc.vehicles[i];
    const std::string tag = "vehicle " + std::to_string(v.id);
    if (!ids.insert(v.id).second) throw InvariantViolation("duplicate vehicle id " + std::to_string(v.id));
    if (!(v.geometry.length > 0.0) || !(v.geometry.width > 0.0)) {
      throw InvariantViolation(tag + ": body length and width must be positive");
    }
    if (v.profile.gamma < 0.0 || v.profile.gamma > 1.0) throw InvariantViolation(tag + ": gamma outside [0, 1]");
    if (v.v0 < 0.0) throw InvariantViolation(tag + ": negative initial speed");
    if (!road.lane_exists(v.lane0, v.s0)) throw InvariantViolation(tag + ": initial lane does not exist at s0");
    if (v.s0 < 0.0 || v.s0 > road.reference.length()) throw InvariantViolation(tag + ": s0 outside the road");
    if (v.controlled() && !v.profile.target_lane) throw InvariantViolation(tag + ": controlled vehicle needs target_lane");
    if (v.profile.target_lane && (*v.profile.target_lane < 0 || *v.profile.target_lane >= main_lanes) &&
        *v.profile.target_lane != v.lane0) {
      throw InvariantViolation(tag + ": target lane must be a main-road lane");
    }
    if (v.controlled() && !v.script.empty()) throw InvariantViolation(tag + ": scripts apply to uncontrolled vehicles only");
    for (const auto& seg : v.script) {
      if (!(seg.t_end > seg.t_start)) throw InvariantViolation(tag + ": script segment with t_end <= t_start");
    }
  }
  for (std::size_t i = 0; i < sc.vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < sc.vehicles.size(); ++j) {
      const auto& a = sc.vehicles[i];
      const auto& b = sc.vehicles[j];
      const double lat = std::abs(road.lane_center(a.lane0) - road.lane_center(b.lane0));
      const double lon = std::abs(a.s0 - b.s0);
      if (lat < 0.5 * (a.geometry.width + b.geometry.width) && lon < 0.5 * (a.geometry.length + b.geometry.length)) {
        throw InvariantViolation("overlapping initial positions of vehicles " + std::to_string(a.id) + " and " +
                                 std::to_string(b.id));
      }
    }
  }
}

WeightVector parse_weight_vector(const Reader& r) {
  r.allow_only({"w_cur", "w_phi", "w_out", "w_acc", "w_jerk", "w_obs"});
  WeightVector w;
  w.w_cur = r.number_or("w_cur", 1.0);
  w.w_phi = r.number_or("w_phi", 1.0);
  w.w_out = r.number_or("w_out", 1.0);
  w.w_acc = r.number_or("w_acc", 1.0);
  w.w_jerk = r.number_or("w_jerk", 1.0);
  w.w_obs = r.number_or("w_obs", 1.0);
  const double values[] = {w.w_cur, w.w_phi, w.w_out, w.w_acc, w.w_jerk, w.w_obs};
  if (std::any_of(std::begin(values), std::end(values), [](double x) { return x < 0.0; })) {
    r.fail("", "weights must be nonnegative");
  }
  if (std::none_of(std::begin(values), std::end(values), [](double x) { return x > 0.0; })) {
    r.fail("", "at least one weight must be positive");
  }
  return w;
}

}  // namespace

WeightSet default_weight_set() {
  WeightSet set;
  set["aggressive"] = WeightVector{1.0, 1.0, 6.5, 1.0, 0.7, 2.0};
  set["normal"] = WeightVector{1.0, 1.0, 5.0, 1.0, 1.0, 4.0};
  set["conservative"] = WeightVector{1.0, 1.0, 4.0, 1.0, 1.2, 6.0};
  return set;
}

Scenario load_scenario(std::string_view text) {
  const json doc = parse_json(text);
  const Reader root(doc, "");
  root.allow_only({"id", "road", "safety", "actions", "vehicles"});

  Scenario sc;
  sc.id = root.has("id") ? root.string("id") : "scenario";

  const Reader road = root.child("road");
  road.allow_only({"lanes", "lane_width", "speed_limit", "length", "centerline", "ramp"});
  sc.road.lanes = road.integer("lanes");
  if (sc.road.lanes < 1) road.fail("lanes", "must be at least 1");
  sc.road.lane_width = road.number_or("lane_width", 3.5);
  if (!(sc.road.lane_width > 0.0)) road.fail("lane_width", "must be positive");
  sc.road.speed_limit = road.number_or("speed_limit", 16.7);
  if (!(sc.road.speed_limit > 0.0)) road.fail("speed_limit", "must be positive");

  std::vector<Point2> centerline;
  if (road.has("centerline")) {
    if (road.has("length")) road.fail("length", "give either length or centerline, not both");
    const json& pts = road.raw("centerline");
    if (!pts.is_array()) road.fail("centerline", "expected a list of [x, y] pairs");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const json& p = pts[i];
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        road.fail("centerline[" + std::to_string(i) + "]", "expected [x, y]");
      }
      centerline.push_back({p[0].get<double>(), p[1].get<double>()});
    }
  } else {
    const double length = road.number_or("length", 1000.0);
    if (!(length > 0.0)) road.fail("length", "must be positive");
    centerline = {{0.0, 0.0}, {length, 0.0}};
  }
  try {
    sc.road.reference = ReferencePath::build(centerline);
  } catch (const DegeneratePath& e) {
    road.fail("centerline", e.what());
  }
  for (int lane = 0; lane < sc.road.lanes; ++lane) {
    sc.road.lane_paths.push_back(lane == 0 ? sc.road.reference : sc.road.reference.offset(sc.road.lane_center(lane)));
  }
  if (road.has("ramp")) {
    const Reader ramp = road.child("ramp");
    ramp.allow_only({"merge_lane", "merge_end_s"});
    RampSpec spec;
    spec.merge_lane = ramp.integer("merge_lane");
    spec.merge_end_s = ramp.number("merge_end_s");
    if (sc.road.lanes < 2 || spec.merge_lane != sc.road.lanes - 1) {
      ramp.fail("merge_lane", "must be the rightmost lane of a road with at least 2 lanes");
    }
    if (!(spec.merge_end_s > 0.0) || spec.merge_end_s > sc.road.reference.length()) {
      ramp.fail("merge_end_s", "must lie on the road");
    }
    sc.road.ramp = spec;
  }

  if (root.has("safety")) {
    const Reader s = root.child("safety");
    s.allow_only({"tau", "mth"});
    sc.safety.tau = s.number_or("tau", sc.safety.tau);
    sc.safety.mth = s.number_or("mth", sc.safety.mth);
    if (!(sc.safety.tau > 0.0)) s.fail("tau", "must be positive");
    if (!(sc.safety.mth > 0.0)) s.fail("mth", "must be positive");
  }

  sc.actions.delta_d = 0.5 * sc.road.lane_width;
  if (root.has("actions")) {
    const Reader a = root.child("actions");
    a.allow_only({"a_acc", "a_dec", "delta_d", "dt_decision"});
    sc.actions.a_acc = a.number_or("a_acc", sc.actions.a_acc);
    sc.actions.a_dec = a.number_or("a_dec", sc.actions.a_dec);
    sc.actions.delta_d = a.number_or("delta_d", sc.actions.delta_d);
    sc.actions.dt = a.number_or("dt_decision", sc.actions.dt);
    if (!(sc.actions.a_acc > 0.0)) a.fail("a_acc", "must be positive");
    if (!(sc.actions.a_dec > 0.0)) a.fail("a_dec", "must be positive");
    if (!(sc.actions.delta_d > 0.0) || sc.actions.delta_d > sc.road.lane_width) {
      a.fail("delta_d", "must lie in (0, lane_width]");
    }
    if (!(sc.actions.dt > 0.0)) a.fail("dt_decision", "must be positive");
  }

  if (!root.has("vehicles") || !root.raw("vehicles").is_array()) root.fail("vehicles", "expected a list");
  const json& list = root.raw("vehicles");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Reader v(list[i], "vehicles[" + std::to_string(i) + "]");
    v.allow_only({"id", "role", "behavior", "gamma", "weights_id", "length", "width", "s0", "lane0", "v0",
                  "target_lane", "desired_speed", "script"});
    VehicleSpec spec;
    spec.id = v.integer("id");
    spec.profile.role = parse_enum<Role>(v, "role", role_from_string);
    spec.profile.behavior = v.has("behavior") ? parse_enum<Behavior>(v, "behavior", behavior_from_string)
                                              : Behavior::Normal;
    spec.profile.gamma = v.number_or("gamma", default_gamma(spec.profile.behavior));
    spec.profile.weights_id = v.has("weights_id") ? v.string("weights_id") : std::string(to_string(spec.profile.behavior));
    spec.geometry.length = v.number_or("length", 5.0);
    spec.geometry.width = v.number_or("width", 2.0);
    spec.s0 = v.number("s0");
    spec.lane0 = v.integer("lane0");
    spec.v0 = v.number("v0");
    if (v.has("target_lane")) spec.profile.target_lane = v.integer("target_lane");
    if (v.has("desired_speed")) spec.desired_speed = v.number("desired_speed");
    if (v.has("script")) {
      const json& segs = v.raw("script");
      if (!segs.is_array()) v.fail("script", "expected a list");
      for (std::size_t k = 0; k < segs.size(); ++k) {
        const Reader seg(segs[k], v.field("script[" + std::to_string(k) + "]"));
        seg.allow_only({"t_start", "t_end", "accel"});
        spec.script.push_back({seg.number("t_start"), seg.number("t_end"), seg.number("accel")});
      }
    }
    sc.vehicles.push_back(std::move(spec));
  }
  std::stable_sort(sc.vehicles.begin(), sc.vehicles.end(),
                   [](const VehicleSpec& a, const VehicleSpec& b) { return a.id < b.id; });
  validate(sc);
  return sc;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Scenario load_scenario_file(const std::filesystem::path& path) { return load_scenario(read_text_file(path)); }

std::string serialize_scenario(const Scenario& sc) {
  json doc;
  doc["id"] = sc.id;
  json road;
  road["lanes"] = sc.road.lanes;
  road["lane_width"] = sc.road.lane_width;
  road["speed_limit"] = sc.road.speed_limit;
  json pts = json::array();
  for (const auto& p : sc.road.reference.waypoints()) pts.push_back({p.x, p.y});
  road["centerline"] = pts;
  if (sc.road.ramp) road["ramp"] = {{"merge_lane", sc.road.ramp->merge_lane}, {"merge_end_s", sc.road.ramp->merge_end_s}};
  doc["road"] = road;
  doc["safety"] = {{"tau", sc.safety.tau}, {"mth", sc.safety.mth}};
  doc["actions"] = {{"a_acc", sc.actions.a_acc},
                    {"a_dec", sc.actions.a_dec},
                    {"delta_d", sc.actions.delta_d},
                    {"dt_decision", sc.actions.dt}};
  json vehicles = json::array();
  for (const auto& v : sc.vehicles) {
    json e;
    e["id"] = v.id;
    e["role"] = std::string(to_string(v.profile.role));
    e["behavior"] = std::string(to_string(v.profile.behavior));
    e["gamma"] = v.profile.gamma;
    e["weights_id"] = v.profile.weights_id;
    e["length"] = v.geometry.length;
    e["width"] = v.geometry.width;
    e["s0"] = v.s0;
    e["lane0"] = v.lane0;
    e["v0"] = v.v0;
    if (v.profile.target_lane) e["target_lane"] = *v.profile.target_lane;
    if (v.desired_speed) e["desired_speed"] = *v.desired_speed;
    if (!v.script.empty()) {
      json segs = json::array();
      for (const auto& s : v.script) segs.push_back({{"t_start", s.t_start}, {"t_end", s.t_end}, {"accel", s.accel}});
      e["script"] = segs;
    }
    vehicles.push_back(e);
  }
  doc["vehicles"] = vehicles;
  return doc.dump(2) + "\n";
}

WeightSet load_weight_set(std::string_view text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw SchemaError("<root>: expected an object of weight vectors");
  WeightSet set;
  for (const auto& [id, node] : doc.items()) {
    set[id] = parse_weight_vector(Reader(node, id));
  }
  if (set.empty()) throw SchemaError("<root>: weight set is empty");
  return set;
}

WeightSet load_weight_set_file(const std::filesystem::path& path) { return load_weight_set(read_text_file(path)); }

std::string serialize_weight_set(const WeightSet& weights) {
  json doc = json::object();
  for (const auto& [id, w] : weights) {
    doc[id] = {{"w_cur", w.w_cur}, {"w_phi", w.w_phi}, {"w_out", w.w_out},
               {"w_acc", w.w_acc}, {"w_jerk", w.w_jerk}, {"w_obs", w.w_obs}};
  }
  return doc.dump(2) + "\n";
}

void check_weight_references(const Scenario& scenario, const WeightSet& weights) {
  for (const auto& v : scenario.vehicles) {
    if (v.controlled() && !weights.contains(v.profile.weights_id)) {
      throw SchemaError("vehicles[id=" + std::to_string(v.id) + "].weights_id: unknown weight vector '" +
                        v.profile.weights_id + "'");
    }
  }
}

}  // namespace mvplan
