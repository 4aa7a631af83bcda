#include "ains/config.hpp"

#include <toml.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace ains {

namespace {

using Keys = std::set<std::string_view>;

void check_keys(const toml::table& t, const std::string& prefix, const Keys& allowed) {
  for (const auto& [k, v] : t) {
    if (!allowed.count(k.str())) {
      throw ConfigError("unknown key '" + (prefix.empty() ? "" : prefix + ".") +
                        std::string(k.str()) + "'");
    }
  }
}

std::string dotted(const std::string& prefix, std::string_view key) {
  return prefix + "." + std::string(key);
}

double get_number(const toml::node& n, const std::string& key) {
  if (auto v = n.value<double>()) return *v;
  throw ConfigError("key '" + key + "' must be a number");
}

void read_double(const toml::table& t, const std::string& prefix, std::string_view key, double& out) {
  if (const toml::node* n = t.get(key)) out = get_number(*n, dotted(prefix, key));
}

void read_int(const toml::table& t, const std::string& prefix, std::string_view key, int& out) {
  if (const toml::node* n = t.get(key)) {
    auto v = n->value<std::int64_t>();
    if (!v || !n->is_integer()) throw ConfigError("key '" + dotted(prefix, key) + "' must be an integer");
    out = static_cast<int>(*v);
  }
}

void read_bool(const toml::table& t, const std::string& prefix, std::string_view key, bool& out) {
  if (const toml::node* n = t.get(key)) {
    auto v = n->value<bool>();
    if (!v) throw ConfigError("key '" + dotted(prefix, key) + "' must be a boolean");
    out = *v;
  }
}

void read_string(const toml::table& t, const std::string& prefix, std::string_view key,
                 std::string& out) {
  if (const toml::node* n = t.get(key)) {
    auto v = n->value<std::string>();
    if (!v) throw ConfigError("key '" + dotted(prefix, key) + "' must be a string");
    out = *v;
  }
}

std::vector<double> number_list(const toml::node& n, const std::string& key) {
  const toml::array* a = n.as_array();
  if (!a) throw ConfigError("key '" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : *a) out.push_back(get_number(e, key));
  return out;
}

Vec3 to_vec3(const toml::node& n, const std::string& key) {
  // a scalar means the same value on every axis
  if (n.is_number()) return Vec3::Constant(get_number(n, key));
  const auto v = number_list(n, key);
  if (v.size() != 3) throw ConfigError("key '" + key + "' must have 3 entries");
  return Vec3(v[0], v[1], v[2]);
}

void read_vec3(const toml::table& t, const std::string& prefix, std::string_view key, Vec3& out) {
  if (const toml::node* n = t.get(key)) out = to_vec3(*n, dotted(prefix, key));
}

const toml::table* sub(const toml::table& root, std::string_view name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  const toml::table* t = n->as_table();
  if (!t) throw ConfigError("key '" + std::string(name) + "' must be a table");
  return t;
}

void apply_scenario(const toml::table& t, Config& c) {
  const std::string p = "scenario";
  check_keys(t, p,
             {"preset", "name", "duration", "imu_rate", "seed", "record_every", "p0", "bias_p0",
              "fail_deg", "joseph", "inject_noise"});
  Scenario& s = c.scenario;
  read_string(t, p, "name", s.name);
  read_double(t, p, "duration", s.duration);
  read_double(t, p, "imu_rate", s.imu_rate);
  if (const toml::node* n = t.get("seed")) {
    auto v = n->value<std::int64_t>();
    if (!v || !n->is_integer() || *v < 0) throw ConfigError("key 'scenario.seed' must be a non-negative integer");
    s.seed = static_cast<std::uint64_t>(*v);
  }
  read_int(t, p, "record_every", s.record_every);
  read_double(t, p, "p0", s.p0);
  read_double(t, p, "bias_p0", s.bias_p0);
  read_double(t, p, "fail_deg", s.fail_deg);
  read_bool(t, p, "joseph", s.joseph);
  read_bool(t, p, "inject_noise", s.inject_noise);
}

void apply_trajectory(const toml::table& t, Trajectory& tr) {
  const std::string p = "trajectory";
  check_keys(t, p,
             {"kind", "radius", "speed", "omega", "accel", "vel0", "pos0", "knot_times", "knots"});
  if (const toml::node* n = t.get("kind")) {
    auto v = n->value<std::string>();
    auto k = v ? trajectory_kind_from_string(*v) : std::nullopt;
    if (!k) throw ConfigError("key 'trajectory.kind' must be circular|constant_input|waypoints");
    tr.kind = *k;
  }
  read_double(t, p, "radius", tr.radius);
  read_double(t, p, "speed", tr.speed);
  read_vec3(t, p, "omega", tr.omega);
  read_vec3(t, p, "accel", tr.accel);
  read_vec3(t, p, "vel0", tr.vel0);
  read_vec3(t, p, "pos0", tr.pos0);
  if (const toml::node* n = t.get("knot_times")) tr.knot_times = number_list(*n, "trajectory.knot_times");
  if (const toml::node* n = t.get("knots")) {
    const toml::array* a = n->as_array();
    if (!a) throw ConfigError("key 'trajectory.knots' must be an array of [x, y, z]");
    tr.knots.clear();
    for (const auto& e : *a) tr.knots.push_back(to_vec3(e, "trajectory.knots"));
  }
}

void apply_noise(const toml::table& t, Scenario& s) {
  const std::string p = "noise";
  check_keys(t, p,
             {"gyro_psd", "accel_psd", "gyro_bias_psd", "accel_bias_psd", "gyro_bias0",
              "accel_bias0"});
  read_vec3(t, p, "gyro_psd", s.noise.gyro_psd);
  read_vec3(t, p, "accel_psd", s.noise.accel_psd);
  read_vec3(t, p, "gyro_bias_psd", s.noise.gyro_bias_psd);
  read_vec3(t, p, "accel_bias_psd", s.noise.accel_bias_psd);
  read_vec3(t, p, "gyro_bias0", s.bias.gyro);
  read_vec3(t, p, "accel_bias0", s.bias.accel);
}

void apply_sensors(const toml::node& n, Scenario& s) {
  const toml::array* a = n.as_array();
  if (!a) throw ConfigError("key 'sensors' must be an array of tables ([[sensors]])");
  s.sensors.clear();
  for (std::size_t i = 0; i < a->size(); ++i) {
    const toml::table* t = (*a)[i].as_table();
    const std::string p = "sensors[" + std::to_string(i) + "]";
    if (!t) throw ConfigError("key '" + p + "' must be a table");
    check_keys(*t, p, {"kind", "rate", "noise_std", "param"});
    SensorConfig sc;
    std::string kind;
    read_string(*t, p, "kind", kind);
    const auto k = sensor_kind_from_string(kind);
    if (!k) throw ConfigError("key '" + p + ".kind' names no sensor kind: '" + kind + "'");
    sc.kind = *k;
    read_double(*t, p, "rate", sc.rate);
    read_double(*t, p, "noise_std", sc.noise_std);
    read_vec3(*t, p, "param", sc.param);
    s.sensors.push_back(sc);
  }
}

void apply_observer(const toml::table& t, ObserverConfig& o) {
  const std::string p = "observer";
  check_keys(t, p, {"rho", "riccati_p0", "riccati_v", "riccati_q", "frame_outputs", "sync_gain",
                    "sync_rho"});
  read_vec3(t, p, "rho", o.rho);
  read_double(t, p, "riccati_p0", o.riccati_p0);
  read_double(t, p, "riccati_v", o.riccati_v);
  read_double(t, p, "riccati_q", o.riccati_q);
  read_bool(t, p, "frame_outputs", o.frame_outputs);
  if (const toml::node* n = t.get("sync_gain")) {
    const auto v = number_list(*n, "observer.sync_gain");
    if (v.size() != 2) throw ConfigError("key 'observer.sync_gain' must have 2 entries");
    o.sync_gain = RowVec2(v[0], v[1]);
  }
  read_double(t, p, "sync_rho", o.sync_rho);
}

Config build(const toml::table& root) {
  check_keys(root, "",
             {"scenario", "trajectory", "noise", "sensors", "init_error", "filter", "observer",
              "montecarlo", "banana", "fig6", "fig3", "preintegrate", "observability"});
  Config c;
  if (const toml::table* t = sub(root, "scenario")) {
    if (const toml::node* n = t->get("preset")) {
      auto v = n->value<std::string>();
      if (!v) throw ConfigError("key 'scenario.preset' must be a string");
      c = preset_config(*v);
    }
    apply_scenario(*t, c);
  }
  if (const toml::table* t = sub(root, "trajectory")) apply_trajectory(*t, c.scenario.trajectory);
  if (const toml::table* t = sub(root, "noise")) apply_noise(*t, c.scenario);
  if (const toml::node* n = root.get("sensors")) apply_sensors(*n, c.scenario);
  if (const toml::table* t = sub(root, "init_error")) {
    check_keys(*t, "init_error", {"attitude_deg", "vel_std", "pos_std"});
    read_double(*t, "init_error", "attitude_deg", c.scenario.init_error.attitude_deg);
    read_double(*t, "init_error", "vel_std", c.scenario.init_error.vel_std);
    read_double(*t, "init_error", "pos_std", c.scenario.init_error.pos_std);
  }
  if (const toml::table* t = sub(root, "filter")) {
    check_keys(*t, "filter", {"kind"});
    std::string k;
    read_string(*t, "filter", "kind", k);
    if (!k.empty()) {
      const auto f = filter_kind_from_string(k);
      if (!f) throw ConfigError("key 'filter.kind' must be invekf|invekf_ext|mekf|se53|sync");
      c.filter = *f;
    }
  }
  if (const toml::table* t = sub(root, "observer")) apply_observer(*t, c.scenario.observer);
  if (const toml::table* t = sub(root, "montecarlo")) {
    check_keys(*t, "montecarlo", {"runs", "jobs"});
    read_int(*t, "montecarlo", "runs", c.runs);
    read_int(*t, "montecarlo", "jobs", c.jobs);
  }
  if (const toml::table* t = sub(root, "banana")) {
    const std::string p = "banana";
    check_keys(*t, p, {"means_x", "samples", "yaw_std_deg", "x_std", "y_std"});
    if (const toml::node* n = t->get("means_x")) c.banana.means_x = number_list(*n, "banana.means_x");
    read_int(*t, p, "samples", c.banana.samples);
    read_double(*t, p, "yaw_std_deg", c.banana.yaw_std_deg);
    read_double(*t, p, "x_std", c.banana.x_std);
    read_double(*t, p, "y_std", c.banana.y_std);
  }
  if (const toml::table* t = sub(root, "fig6")) {
    const std::string p = "fig6";
    check_keys(*t, p, {"dt", "steps", "runs", "yaw_rate_std_deg", "contour_points"});
    read_double(*t, p, "dt", c.fig6.dt);
    read_int(*t, p, "steps", c.fig6.steps);
    read_int(*t, p, "runs", c.fig6.runs);
    read_double(*t, p, "yaw_rate_std_deg", c.fig6.yaw_rate_std_deg);
    read_int(*t, p, "contour_points", c.fig6.contour_points);
  }
  if (const toml::table* t = sub(root, "fig3")) {
    check_keys(*t, "fig3", {"dts"});
    if (const toml::node* n = t->get("dts")) c.fig3_dts = number_list(*n, "fig3.dts");
  }
  if (const toml::table* t = sub(root, "preintegrate")) {
    check_keys(*t, "preintegrate", {"window", "with_bias"});
    read_double(*t, "preintegrate", "window", c.preintegrate.window);
    read_bool(*t, "preintegrate", "with_bias", c.preintegrate.with_bias);
  }
  if (const toml::table* t = sub(root, "observability")) {
    check_keys(*t, "observability", {"horizon"});
    read_int(*t, "observability", "horizon", c.horizon);
  }
  c.banana.seed = c.scenario.seed;
  c.fig6.seed = c.scenario.seed;
  try {
    validate(c.scenario);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace

Config preset_config(std::string_view name) {
  Config c;
  if (name == "fig5") {
    c.scenario.name = "fig5";
    return c;
  }
  const auto s = preset(name);
  if (!s) throw ConfigError("unknown scenario '" + std::string(name) + "'");
  c.scenario = *s;
  if (name == "fig6") {
    c.fig6.dt = s->dt();
    c.fig6.steps = static_cast<int>(s->steps());
    c.runs = c.fig6.runs;
  }
  return c;
}

Config parse_config(std::string_view text, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << e.description() << " (" << e.source().begin << ")";
    throw ConfigError(os.str());
  }
  return build(root);
}

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace ains
