#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gcwave/flow.hpp"
#include "gcwave/halfwave.hpp"
#include "gcwave/metric.hpp"

namespace gcwave {

/// Radial exponential weight f(r) = exp(sigma * int_1^r c(s)/s ds), with c a
/// smooth slowly-varying interpolant of the dyadic sequence c_j. Used to
/// dominate metric-perturbation errors in the exterior multiplier.
class BootstrapWeight {
 public:
  BootstrapWeight(const AFEstimate& af, double sigma);

  double sigma() const { return sigma_; }
  double r0() const { return r0_; }
  bool zero_substituted() const { return zero_substituted_; }

  /// Smooth interpolant with c(s) in (c_j, 2 c_j) on each dyadic segment.
  double c_at(double s) const;
  double f(double r) const;
  double f_deriv(double r) const { return sigma_ * c_at(r) / r * f(r); }

 private:
  double eval_logc(double u) const;  // piecewise-cubic log c in u = log2 s

  double sigma_ = 1.0;
  double r0_ = 1.0;
  bool zero_substituted_ = false;
  std::vector<double> knot_u_, knot_logc_, knot_slope_;
  std::vector<double> cum_integral_;  // of c(2^u) ln 2 du at knots
};

/// One element of the finite cover used by the semi-bounded construction:
/// a bump at a trapped point together with its forward damping-hit data.
struct CoverElement {
  PhasePoint seed;       // Phi-normalized
  double s_hit = 0.0;    // forward flow parameter of the damping hit
  double alpha = 0.0;    // half the damping value at the hit
  double weight_C = 0.0; // absorption constant 2/alpha
  double chi_inner = 0.15;
  double chi_outer = 0.3;
};

struct SemiboundedCover {
  Branch branch = Branch::plus;
  std::vector<CoverElement> elems;
  double C_pm = 0.0;  // sum of weight_C
  double s_max = 0.0; // max s_hit
};

struct EscapeOptions {
  double cover_radius = 0.25;   // greedy cover separation in phase space
  double chi_inner = 0.15;
  double chi_outer = 0.3;
  double fd_step = 1e-5;        // bracket step, scaled by coordinate magnitude
  FlowOptions flow;             // quadrature flows; keep tolerances tight so
                                // finite differences of flow integrals stay clean
  double a_threshold = 0.0;
  double cover_horizon = 500.0;
  double psi_delta_frac = 0.1;  // lower xi-window margin as fraction of xi_lo
  double excl_margin = 0.4;     // radial margin around the detected trapped range
  int n_transit_samples = 48;
  double transit_guard = 0.0;   // 0 selects 40 * R
  int n_probe = 96;             // epsilon probes in {2R <= |x| <= 4R}
  int max_eps_halvings = 24;
  int cover_validation_samples = 16;
};

/// Builds the per-branch semi-bounded cover: each trapped seed is flowed
/// forward to its damping hit; the greedy reduction keeps seeds at least
/// cover_radius apart. Throws if a seed never meets {a > threshold}.
SemiboundedCover build_q_semibounded(const MetricModel& m, Branch br,
                                     const std::vector<PhasePoint>& trapped_seeds,
                                     const EscapeOptions& opt);

/// Interior non-trapped symbol data: psi support windows, the measured
/// transit bound, and the integration cap.
struct QInPart {
  double R = 1.0;
  double xi_lo = 1.0, xi_hi = 1.0;  // plateau window of |xi| after Phi-normalization
  double delta_w = 0.1;
  bool excl_active = false;
  double excl_r_lo = 0.0, excl_r_hi = 0.0, excl_margin = 0.4;
  double transit_bound = 0.0;  // measured max transit, padded 2x
  double cap = 0.0;            // forward-quadrature cap
  double escape_delta = 0.1;
};

struct EscapeParams {
  double lambda = 4.0;
  double sigma = 4.0;
  double gamma = 16.0;
  double epsilon = 1.0;
};

/// The assembled escape symbol q, correction m, and evaluation machinery.
/// All evaluators vanish identically where both |b_pm| <= lambda.
class EscapeAssembly {
 public:
  EscapeAssembly(MetricModel m, BootstrapWeight f, SemiboundedCover cover_plus,
                 SemiboundedCover cover_minus, QInPart q_in, EscapeParams params,
                 EscapeOptions opt);

  const EscapeParams& params() const { return params_; }
  const MetricModel& metric() const { return metric_; }
  const BootstrapWeight& bootstrap() const { return f_; }
  const SemiboundedCover& cover(Branch br) const {
    return br == Branch::plus ? cover_plus_ : cover_minus_;
  }
  const QInPart& q_in_part() const { return q_in_; }
  double R() const { return q_in_.R; }

  /// Semi-bounded symbol (composed with Phi) at a phase point.
  double q1(const PhasePoint& pt, Branch br) const;
  /// eps * q_in + q_out at a phase point.
  double q2(const PhasePoint& pt, Branch br) const;
  double q_out(const PhasePoint& pt, Branch br) const;
  double q_in(const PhasePoint& pt, Branch br) const;

  /// High-frequency cutoff chi_{>lambda}(|b_pm|).
  double cutoff(const PhasePoint& pt, Branch br) const;
  /// (e^{-sigma q1} + e^{-sigma q2}) * cutoff for one branch.
  double g_pm(const PhasePoint& pt, Branch br) const;

  /// q(tau, x, xi) = (tau - b+) g- + (tau - b-) g+.
  double q(double tau, const PhasePoint& pt) const;

  /// H_p q + 2 gamma tau a q via central differences of q along the full
  /// Hamiltonian field (the tau-dependent spatial flow).
  double bracket(double tau, const PhasePoint& pt) const;

  /// The bracket is exactly quadratic in tau; coefficients are recovered from
  /// three evaluations. a0 tau^2 + a1 tau + a2.
  struct TauPoly {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
  };
  TauPoly bracket_coeffs(const PhasePoint& pt) const;

  /// m = -(a1 (b+ + b-) + 2 (a0 b+ b- + a2)) / (b+ - b-)^2.
  double correction_m(const TauPoly& coeffs, double b_plus, double b_minus) const;
  double correction_m(const PhasePoint& pt) const;

  /// Corrected bracket: H_p q + 2 gamma tau a q + m p, evaluated from the
  /// tau-polynomial form.
  double total(double tau, const TauPoly& coeffs, double m_val, double b_plus,
               double b_minus) const;

 private:
  MetricModel metric_;
  BootstrapWeight f_;
  SemiboundedCover cover_plus_, cover_minus_;
  QInPart q_in_;
  EscapeParams params_;
  EscapeOptions opt_;
};

/// Builds psi's windows from flow data, measures the transit bound (failing
/// loudly if a sampled ray lingers), and returns the interior part.
QInPart build_q_in_part(const MetricModel& m, double R, const BScaleBounds& bscale,
                        bool excl_active, double excl_r_lo, double excl_r_hi,
                        const EscapeOptions& opt);

/// Assembles q for given parameters; epsilon is bisected downward from
/// params.epsilon until the interior boundary error is dominated on
/// {2R <= |x| <= 4R}. Throws if the search exhausts its range.
EscapeAssembly assemble_q(const MetricModel& m, const AFEstimate& af, const BScaleBounds& bscale,
                          double R, const std::vector<PhasePoint>& trapped_plus,
                          const std::vector<PhasePoint>& trapped_minus, EscapeParams params,
                          const EscapeOptions& opt);

struct EscapeSampleSpec {
  double x_radius = 8.0;    // usually 8R
  double xi_lo = 4.0;       // usually lambda
  double xi_hi = 32.0;      // usually 8 lambda
  double tau_bound = 64.0;  // usually C_b * 8 lambda
  int n_points = 12500;
  int n_tau = 6;
  std::uint64_t rng_seed = 1;
};

struct WorstSample {
  double value = 0.0;
  double tau = 0.0;
  Vec3 x, xi;
  bool char_set = false;
};

struct PositivityReport {
  bool pass = false;
  double c0 = 0.0;          // reported floor: min(char-set min, 1st percentile)
  double min_value = 0.0;   // global sample min
  double char_min = 0.0;
  double frac_below_c0 = 0.0;
  double frac_below_target = 0.0;
  int n_samples = 0;
  int n_char = 0;
  int n_points_active = 0;    // both cutoffs fully engaged
  int n_points_inactive = 0;  // both cutoffs identically zero
  int n_points_mixed = 0;
  bool correction_valid_all = false;
  int n_correction_failures = 0;
  std::vector<WorstSample> worst;
  EscapeParams params;
};

/// Samples (H_p q + 2 gamma tau a q + m p) <x>^2 / (tau^2 + |xi|^2) over the
/// spec'd region plus the characteristic set tau = b_pm, and reports the
/// measured floor. A failing report is a valid output.
PositivityReport verify_escape_inequality(const EscapeAssembly& assembly,
                                          const EscapeSampleSpec& spec, double c_target,
                                          int n_threads = 1);

struct TuneEntry {
  EscapeParams params;
  double c0 = 0.0;
  bool passed = false;
};

struct TuneResult {
  bool found = false;
  EscapeParams params;
  PositivityReport report;
  std::vector<TuneEntry> history;
  std::optional<EscapeAssembly> assembly;
};

struct TuneGrids {
  std::vector<double> lambda{4, 8, 16, 32};
  std::vector<double> sigma{4, 16, 64};
  std::vector<double> gamma{16, 64, 256};
  double epsilon_start = 1.0;
  int tune_points = 2500;   // phase points during the scan
  int final_points = 12500; // phase points for the recorded report
  int n_tau = 6;
};

/// Deterministic parameter scan: first (lambda, sigma, gamma, epsilon)
/// passing the positivity report is kept and re-verified at full sample count.
TuneResult tune_escape(const MetricModel& m, const AFEstimate& af, const BScaleBounds& bscale,
                       double R, const std::vector<PhasePoint>& trapped_plus,
                       const std::vector<PhasePoint>& trapped_minus, const TuneGrids& grids,
                       double c_target, std::uint64_t rng_seed, const EscapeOptions& opt,
                       int n_threads = 1);

}  // namespace gcwave
