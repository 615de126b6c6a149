#include "gcwave/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gcwave/report.hpp"

namespace gcwave {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + path + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key()))
      throw ConfigError("unknown config key '" + (path.empty() ? it.key() : path + "." + it.key()) +
                        "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_vec3(const json& j, const char* key, Vec3& out, const std::string& path) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3)
    throw ConfigError("config key '" + path + "." + key + "' must be a 3-element array");
  for (int i = 0; i < 3; ++i) out[i] = a[static_cast<size_t>(i)].get<double>();
}

MetricSpec parse_metric(const json& j, const std::string& path) {
  check_keys(j, path, {"name", "amplitude", "r_c", "width", "eps"});
  MetricSpec m;
  read(j, "name", m.name);
  if (m.name != "minkowski" && m.name != "trapped_shell" && m.name != "crossterm_toy")
    throw ConfigError("config key '" + path + ".name': unknown metric '" + m.name + "'");
  read(j, "amplitude", m.amplitude);
  read(j, "r_c", m.r_c);
  read(j, "width", m.width);
  read(j, "eps", m.eps);
  return m;
}

DampingSpec parse_damping(const json& j, const std::string& path) {
  check_keys(j, path, {"balls"});
  DampingSpec d;
  if (!j.contains("balls")) return d;
  const auto& balls = j.at("balls");
  if (!balls.is_array()) throw ConfigError("config key '" + path + ".balls' must be an array");
  int i = 0;
  for (const auto& b : balls) {
    std::ostringstream bp;
    bp << path << ".balls[" << i++ << "]";
    check_keys(b, bp.str(), {"center", "radius", "amplitude"});
    DampingBall ball;
    read_vec3(b, "center", ball.center, bp.str());
    read(b, "radius", ball.radius);
    read(b, "amplitude", ball.amplitude);
    if (ball.radius <= 0.0) throw ConfigError("config key '" + bp.str() + ".radius' must be > 0");
    if (ball.amplitude < 0.0)
      throw ConfigError("config key '" + bp.str() + ".amplitude' must be >= 0");
    d.balls.push_back(ball);
  }
  return d;
}

}  // namespace

ScenarioConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  ScenarioConfig c;
  check_keys(j, "", {"rng_seed", "output_dir", "metric", "damping", "flow", "af", "escape",
                     "solver", "led"});
  read(j, "rng_seed", c.rng_seed);
  read(j, "output_dir", c.output_dir);
  if (j.contains("metric")) c.metric = parse_metric(j.at("metric"), "metric");
  if (j.contains("damping")) c.damping = parse_damping(j.at("damping"), "damping");

  if (j.contains("flow")) {
    const auto& f = j.at("flow");
    check_keys(f, "flow",
               {"R", "delta_frac", "t_max", "seeds_per_sign", "targeted_per_sign", "rtol", "atol",
                "a_threshold_frac"});
    read(f, "R", c.flow.R);
    read(f, "delta_frac", c.flow.delta_frac);
    read(f, "t_max", c.flow.t_max);
    read(f, "seeds_per_sign", c.flow.seeds_per_sign);
    read(f, "targeted_per_sign", c.flow.targeted_per_sign);
    read(f, "rtol", c.flow.rtol);
    read(f, "atol", c.flow.atol);
    read(f, "a_threshold_frac", c.flow.a_threshold_frac);
    if (c.flow.t_max <= 0.0) throw ConfigError("config key 'flow.t_max' must be > 0");
    if (c.flow.delta_frac <= 0.0) throw ConfigError("config key 'flow.delta_frac' must be > 0");
  }

  if (j.contains("af")) {
    const auto& a = j.at("af");
    check_keys(a, "af", {"j_max", "samples_per_annulus", "threshold", "delta"});
    read(a, "j_max", c.af.j_max);
    read(a, "samples_per_annulus", c.af.samples_per_annulus);
    read(a, "threshold", c.af.threshold);
    read(a, "delta", c.af.delta);
    if (c.af.j_max < 1) throw ConfigError("config key 'af.j_max' must be >= 1");
  }

  if (j.contains("escape")) {
    const auto& e = j.at("escape");
    check_keys(e, "escape",
               {"lambda", "sigma", "gamma", "epsilon_start", "points", "tune_points", "n_tau",
                "c_target", "cover_radius", "fd_step", "trapped_seeds"});
    read(e, "lambda", c.escape.lambda);
    read(e, "sigma", c.escape.sigma);
    read(e, "gamma", c.escape.gamma);
    read(e, "epsilon_start", c.escape.epsilon_start);
    read(e, "points", c.escape.points);
    read(e, "tune_points", c.escape.tune_points);
    read(e, "n_tau", c.escape.n_tau);
    read(e, "c_target", c.escape.c_target);
    read(e, "cover_radius", c.escape.cover_radius);
    read(e, "fd_step", c.escape.fd_step);
    read(e, "trapped_seeds", c.escape.trapped_seeds);
    if (c.escape.lambda.empty()) throw ConfigError("config key 'escape.lambda' must be nonempty");
    for (double l : c.escape.lambda)
      if (l <= 1.0) throw ConfigError("config key 'escape.lambda': entries must exceed 1");
  }

  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    check_keys(s, "solver",
               {"n", "extent", "cfl", "dt", "sponge_width", "sponge_strength", "snapshot_dt",
                "data", "t_final", "store_history", "store_stride"});
    read(s, "n", c.solver.grid.n);
    read(s, "extent", c.solver.grid.extent);
    read(s, "cfl", c.solver.grid.cfl);
    read(s, "dt", c.solver.grid.dt);
    read(s, "sponge_width", c.solver.grid.sponge_width);
    read(s, "sponge_strength", c.solver.grid.sponge_strength);
    read(s, "snapshot_dt", c.solver.grid.snapshot_dt);
    read(s, "t_final", c.solver.t_final);
    read(s, "store_history", c.solver.store_history);
    read(s, "store_stride", c.solver.store_stride);
    if (s.contains("data")) {
      const auto& d = s.at("data");
      check_keys(d, "solver.data",
                 {"type", "center", "radius", "amplitude", "ell", "ring_width", "ring_radius"});
      read(d, "type", c.solver.data.type);
      if (c.solver.data.type != "bump" && c.solver.data.type != "ring")
        throw ConfigError("config key 'solver.data.type': must be 'bump' or 'ring'");
      if (d.contains("center")) {
        c.solver.data.center_auto = false;
        read_vec3(d, "center", c.solver.data.center, "solver.data");
      }
      read(d, "radius", c.solver.data.radius);
      read(d, "amplitude", c.solver.data.amplitude);
      read(d, "ell", c.solver.data.ell);
      read(d, "ring_width", c.solver.data.ring_width);
      if (d.contains("ring_radius")) {
        c.solver.data.center_auto = false;
        read(d, "ring_radius", c.solver.data.ring_radius);
      }
    }
  }

  if (j.contains("led")) {
    const auto& l = j.at("led");
    check_keys(l, "led", {"t_list", "cases"});
    read(l, "t_list", c.led.t_list);
    if (c.led.t_list.empty()) throw ConfigError("config key 'led.t_list' must be nonempty");
    if (l.contains("cases")) {
      int i = 0;
      for (const auto& cs : l.at("cases")) {
        std::ostringstream cp;
        cp << "led.cases[" << i++ << "]";
        check_keys(cs, cp.str(), {"label", "metric", "damping"});
        LedCaseSpec spec;
        read(cs, "label", spec.label);
        spec.metric = cs.contains("metric") ? parse_metric(cs.at("metric"), cp.str() + ".metric")
                                            : c.metric;
        spec.damping = cs.contains("damping")
                           ? parse_damping(cs.at("damping"), cp.str() + ".damping")
                           : DampingSpec{};
        if (spec.label.empty()) throw ConfigError("config key '" + cp.str() + ".label' required");
        c.led.cases.push_back(std::move(spec));
      }
    }
  }
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config(const ScenarioConfig& c) {
  json j;
  j["rng_seed"] = c.rng_seed;
  j["metric"] = {{"name", c.metric.name},
                 {"amplitude", c.metric.amplitude},
                 {"r_c", c.metric.r_c},
                 {"width", c.metric.width},
                 {"eps", c.metric.eps}};
  json balls = json::array();
  for (const auto& b : c.damping.balls)
    balls.push_back({{"center", {b.center[0], b.center[1], b.center[2]}},
                     {"radius", b.radius},
                     {"amplitude", b.amplitude}});
  j["damping"] = {{"balls", balls}};
  j["flow"] = {{"R", c.flow.R},
               {"delta_frac", c.flow.delta_frac},
               {"t_max", c.flow.t_max},
               {"seeds_per_sign", c.flow.seeds_per_sign},
               {"targeted_per_sign", c.flow.targeted_per_sign},
               {"rtol", c.flow.rtol},
               {"atol", c.flow.atol},
               {"a_threshold_frac", c.flow.a_threshold_frac}};
  j["af"] = {{"j_max", c.af.j_max},
             {"samples_per_annulus", c.af.samples_per_annulus},
             {"threshold", c.af.threshold},
             {"delta", c.af.delta}};
  j["escape"] = {{"lambda", c.escape.lambda},     {"sigma", c.escape.sigma},
                 {"gamma", c.escape.gamma},       {"epsilon_start", c.escape.epsilon_start},
                 {"points", c.escape.points},     {"tune_points", c.escape.tune_points},
                 {"n_tau", c.escape.n_tau},       {"c_target", c.escape.c_target},
                 {"cover_radius", c.escape.cover_radius},
                 {"fd_step", c.escape.fd_step},   {"trapped_seeds", c.escape.trapped_seeds}};
  j["solver"] = {{"n", c.solver.grid.n},
                 {"extent", c.solver.grid.extent},
                 {"cfl", c.solver.grid.cfl},
                 {"dt", c.solver.grid.dt},
                 {"sponge_width", c.solver.grid.sponge_width},
                 {"sponge_strength", c.solver.grid.sponge_strength},
                 {"snapshot_dt", c.solver.grid.snapshot_dt},
                 {"t_final", c.solver.t_final},
                 {"store_history", c.solver.store_history},
                 {"store_stride", c.solver.store_stride},
                 {"data",
                  {{"type", c.solver.data.type},
                   {"center_auto", c.solver.data.center_auto},
                   {"center", {c.solver.data.center[0], c.solver.data.center[1],
                               c.solver.data.center[2]}},
                   {"radius", c.solver.data.radius},
                   {"amplitude", c.solver.data.amplitude},
                   {"ell", c.solver.data.ell},
                   {"ring_width", c.solver.data.ring_width},
                   {"ring_radius", c.solver.data.ring_radius}}}};
  json cases = json::array();
  for (const auto& cs : c.led.cases)
    cases.push_back({{"label", cs.label}, {"metric", cs.metric.name}});
  j["led"] = {{"t_list", c.led.t_list}, {"cases", cases}};
  return j.dump();
}

MetricModel build_metric(const MetricSpec& spec, const DampingSpec& damping) {
  MetricModel base = [&] {
    if (spec.name == "minkowski") return MetricModel::minkowski();
    if (spec.name == "trapped_shell")
      return MetricModel::trapped_shell(spec.amplitude, spec.r_c, spec.width);
    if (spec.name == "crossterm_toy") return MetricModel::crossterm_toy(spec.eps);
    throw ConfigError("unknown metric name '" + spec.name + "'");
  }();
  if (damping.balls.empty()) return base;
  return base.with_damping(DampingProfile(damping.balls));
}

}  // namespace gcwave
