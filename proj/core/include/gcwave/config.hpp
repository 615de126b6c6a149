#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcwave/metric.hpp"
#include "gcwave/solver.hpp"

namespace gcwave {

/// Configuration problem: unknown key, bad type, out-of-range value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricSpec {
  std::string name = "trapped_shell";  // minkowski | trapped_shell | crossterm_toy
  double amplitude = 2.0;
  double r_c = 5.0;
  double width = 1.0;
  double eps = 0.05;
};

struct DampingSpec {
  std::vector<DampingBall> balls;
};

struct FlowConfig {
  double R = 0.0;  // 0 = use the estimated R0
  double delta_frac = 0.1;
  double t_max = 500.0;
  int seeds_per_sign = 4096;
  int targeted_per_sign = 64;
  double rtol = 1e-10;
  double atol = 1e-12;
  double a_threshold_frac = 1e-6;
};

struct AfConfig {
  int j_max = 8;
  int samples_per_annulus = 512;
  double threshold = 0.1;
  double delta = 0.1;
};

struct EscapeConfig {
  std::vector<double> lambda{4, 8, 16, 32};
  std::vector<double> sigma{4, 16, 64};
  std::vector<double> gamma{16, 64, 256};
  double epsilon_start = 1.0;
  int points = 12500;       // phase points in the recorded report
  int tune_points = 2500;   // phase points during the scan
  int n_tau = 6;
  double c_target = 0.0;
  double cover_radius = 0.25;
  double fd_step = 1e-5;
  int trapped_seeds = 24;   // cover candidates per branch
};

struct DataSpec {
  std::string type = "bump";  // bump | ring
  bool center_auto = true;    // bump center / ring radius from the detected circular orbit
  Vec3 center{2.0, 0.0, 0.0};
  double radius = 2.0;  // bump radius
  double amplitude = 1.0;
  // ring: a rotating angular harmonic cos(l theta - omega t) localized on the
  // circular orbit; couples mostly into the trapped band.
  int ell = 9;
  double ring_width = 2.4;
  double ring_radius = 0.0;  // 0 = detected r_*
};

struct SolverConfig {
  GridSpec grid;
  DataSpec data;
  double t_final = 80.0;
  bool store_history = false;
  int store_stride = 8;
};

struct LedCaseSpec {
  std::string label;
  MetricSpec metric;
  DampingSpec damping;
};

struct LedConfig {
  std::vector<double> t_list{10, 20, 40, 80};
  std::vector<LedCaseSpec> cases;  // empty = flat / damped / undamped defaults
};

struct ScenarioConfig {
  std::uint64_t rng_seed = 1;
  std::string output_dir = "out";
  MetricSpec metric;
  DampingSpec damping;
  FlowConfig flow;
  AfConfig af;
  EscapeConfig escape;
  SolverConfig solver;
  LedConfig led;
};

/// Strict JSON config load: unknown keys are rejected with their full path.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config(const std::string& json_text);

/// Canonical serialization of the effective config (defaults filled in);
/// hashed into the run manifest.
std::string canonical_config(const ScenarioConfig& c);

MetricModel build_metric(const MetricSpec& spec, const DampingSpec& damping);

}  // namespace gcwave
