#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gcwave/halfwave.hpp"
#include "gcwave/ode.hpp"

namespace gcwave {

struct FlowOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double drift_tol = 1e-6;  // trajectories drifting more are flagged invalid
  int sample_stride = 1;    // keep every k-th accepted step
  // when nonempty, the trajectory is sampled at exactly these parameters
  // (monotone toward the end of the span) via the integrator's dense output
  std::vector<double> sample_at;
};

enum class FlowKind { half_plus, half_minus, full };

/// Sampled flow orbit. Half flows carry (x, xi) states; the full flow carries
/// (t, tau, x, xi). conserved_drift is the max relative drift of b_pm along
/// half orbits, or of tau and (symbol-scaled) p along full null orbits.
struct Trajectory {
  FlowKind kind = FlowKind::half_plus;
  std::vector<double> s;
  std::vector<PhasePoint> half_states;
  std::vector<FullPhasePoint> full_states;
  double conserved_drift = 0.0;
  bool valid = true;
  OdeStatus status = OdeStatus::ok;
};

Trajectory integrate_half(const MetricModel& m, Branch br, const PhasePoint& w0, double s_begin,
                          double s_end, const FlowOptions& opt = {});

Trajectory integrate_full(const MetricModel& m, const FullPhasePoint& w0, double s_begin,
                          double s_end, const FlowOptions& opt = {});

/// Deviation between the t-reparameterized full flow and the matching
/// half-wave flow, for characteristic data (p(w0) = 0, tau0 = b_pm branch).
struct ReparamReport {
  double max_dev_x = 0.0;
  double max_dev_xi = 0.0;
  int n_samples = 0;
  Branch branch = Branch::plus;
};
ReparamReport reparam_match(const MetricModel& m, const FullPhasePoint& w0, double t_window,
                            int n_samples = 200, const FlowOptions& opt = {});

enum class RayVerdict { escaped, trapped, undetermined };
enum class RayDirection { forward, backward, both };

inline const char* verdict_name(RayVerdict v) {
  switch (v) {
    case RayVerdict::escaped: return "Escaped";
    case RayVerdict::trapped: return "Trapped";
    default: return "Undetermined";
  }
}

struct ClassifyParams {
  double R = 1.0;             // must be >= estimated R0
  double delta = 0.1;         // escape margin above |x0|
  double t_max = 500.0;       // flow-parameter horizon per direction
  RayDirection direction = RayDirection::both;
  FlowOptions flow;
  double a_threshold = 0.0;   // damping-hit threshold (0 disables tracking)
};

struct RayClass {
  RayVerdict verdict = RayVerdict::undetermined;
  double escape_param = 0.0;  // signed flow parameter s' when escaped
  double horizon = 0.0;
  double min_radius = 0.0;
  double max_radius = 0.0;
  double conserved_drift = 0.0;
  bool permanence_ok = true;   // |x| kept increasing 10% past s'
  bool forward_bounded = false;
  bool backward_bounded = false;
  double max_damping = 0.0;    // max a(x_s) seen over the integrated orbit
  double first_hit_s = 0.0;    // signed parameter of first a > threshold
  bool hit_damping = false;
  std::string diagnostic;
};

/// Classifies the half-wave ray through w0 using the escape criterion
/// |x_s| >= max(2R, |x0| + delta); Trapped additionally requires
/// max_radius <= 2R over the full horizon.
RayClass classify_ray(const MetricModel& m, Branch br, const PhasePoint& w0,
                      const ClassifyParams& p);

struct GccRayRecord {
  int seed_index = 0;
  Branch branch = Branch::plus;
  PhasePoint seed;
  RayClass ray;
};

struct GccReport {
  std::vector<GccRayRecord> rays;
  int n_trapped = 0;
  int n_escaped = 0;
  int n_undetermined = 0;
  int n_semi_bounded = 0;       // bounded in exactly one direction at the horizon
  int n_trapped_hit = 0;
  int n_semi_hit = 0;
  double trapped_fraction_hit = 0.0;
  double a_threshold = 0.0;
};

/// Runs classify_ray over a seed ensemble (both branches) and audits the
/// geometric control condition: every Trapped ray must meet {a > threshold}.
/// Undetermined rays are reported separately and never count as controlled.
GccReport check_gcc(const MetricModel& m, const std::vector<PhasePoint>& seeds_plus,
                    const std::vector<PhasePoint>& seeds_minus, const ClassifyParams& p,
                    int n_threads = 1);

struct ScalingDeviation {
  double max_dev_x = 0.0;
  double max_dev_xi = 0.0;
};
/// Checks x_s(x, lambda xi) = x_s(x, xi) and xi_s(x, lambda xi) = lambda xi_s(x, xi).
ScalingDeviation verify_flow_scaling(const MetricModel& m, const PhasePoint& w0, double lambda,
                                     Branch br, double s_end, int n_samples = 200,
                                     const FlowOptions& opt = {});

/// Circular-orbit radius of the radial profile V(r) = b_plus((r,0,0), e2) / r,
/// found by scanning for critical points. stable == true marks a local
/// minimum of V (rays launched tangentially there stay on the circle).
struct CircularOrbit {
  double radius = 0.0;
  bool stable = false;
};
std::vector<CircularOrbit> circular_orbit_radii(const MetricModel& m, double r_lo, double r_hi,
                                                int n_scan = 4096);

/// Deterministic GCC seed ensemble: scrambled-Halton points of {|x| <= 2R} x
/// {unit xi}, Phi_pm-normalized, plus tangential seeds on detected circular
/// orbits.
std::vector<PhasePoint> gcc_seed_set(const MetricModel& m, Branch br, double R, int n_bulk,
                                     int n_targeted, std::uint64_t rng_seed);

}  // namespace gcwave
