#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gcwave/metric.hpp"

namespace gcwave {

struct GridSpec {
  double extent = 32.0;  // domain [-L, L]^3
  int n = 96;            // points per axis
  double cfl = 0.4;
  double dt = 0.0;  // 0 derives the step from the CFL bound, snapped to snapshot_dt
  double sponge_width = 6.0;
  double sponge_strength = 2.0;
  double snapshot_dt = 0.5;

  double h() const { return 2.0 * extent / (n - 1); }
};

using ScalarField = std::function<double(const Vec3&)>;
using Forcing = std::function<double(double, const Vec3&)>;

struct WaveData {
  ScalarField u0;
  ScalarField v0;  // d_t u at t = 0
};

/// Smooth compactly supported radial bump of given radius and height.
ScalarField bump_data(const Vec3& center, double radius, double amplitude);

/// Rotating angular harmonic cos(l theta - omega t) localized on the circle
/// of the given radius in the z = 0 plane. Returns (u0, v0).
WaveData ring_data(double ring_radius, int ell, double width, double amplitude, double omega);

struct EnergySample {
  double t = 0.0;
  double energy = 0.0;          // E[u](t) = int g^{ij} d_i u d_j u + |d_t u|^2
  double grad_norm_sq = 0.0;    // ||∂u(t)||_{L^2}^2 (flat weights)
  double damping_power = 0.0;   // 2 int a |d_t u|^2
  double sponge_power = 0.0;    // 2 int a_sponge |d_t u|^2
  double forcing_power = 0.0;   // 2 int f d_t u
  double support_radius = 0.0;  // max |x| with |u| > 1e-12
};

/// Per-annulus space-time integrals accumulated up to one checkpoint time.
struct LECheckpoint {
  double T = 0.0;
  std::vector<double> du_sq;    // int_0^T int_{A_j} <x>^{-1} |∂u|^2
  std::vector<double> u32_sq;   // int int <x>^{-3} |u|^2
  std::vector<double> u12_sq;   // int int <x>^{-1} |u|^2
  std::vector<double> f_sq;     // int int <x>^{+1} |f|^2
  double f_l1l2 = 0.0;          // int ||f(t)||_{L^2} dt
  double sup_grad_norm = 0.0;   // sup_{t<=T} ||∂u(t)||_{L^2}
  double energy_at_T = 0.0;
};

struct StoredSnapshot {
  double t = 0.0;
  std::vector<double> u;
  std::vector<double> v;
};

struct WaveHistory {
  GridSpec grid;
  std::string metric_name;
  int j_max = 0;  // annuli 0..j_max intersect the domain
  double data_grad_norm = 0.0;  // ||∂u(0)||_{L^2}
  bool has_forcing = false;
  std::vector<EnergySample> energy_trace;
  std::vector<LECheckpoint> checkpoints;
  std::vector<StoredSnapshot> stored;  // optional thinned raw fields
};

struct EvolveOptions {
  std::vector<double> t_checkpoints;  // accumulator checkpoints (multiples of snapshot_dt)
  int store_stride = 0;               // keep every k-th snapshot's raw fields (0 = none)
  int n_threads = 1;
};

/// Leapfrog evolution of d_t^2 u - 2 g^{0j} d_j d_t u - (d_j g^{0j}) d_t u
/// - d_i(g^{ij} d_j u) + a d_t u = f with a graded sponge near the boundary.
/// The cross term is handled by a two-pass predictor-corrector; the damping
/// term is integrated implicitly. Refuses to run if the requested dt violates
/// the CFL bound; aborts with the step index if the field leaves finite range.
WaveHistory evolve(const MetricModel& m, const GridSpec& grid, const WaveData& data,
                   const Forcing& forcing, double T, const EvolveOptions& opt = {});

/// Midpoint-rule energy of one snapshot.
double energy(const MetricModel& m, const GridSpec& grid, const std::vector<double>& u,
              const std::vector<double>& v);

/// Max over interior snapshot times of the energy-identity defect
/// |dE/dt - (2 int f d_t u - 2 int (a + a_sponge) |d_t u|^2)| / max E.
double dissipation_residual(const WaveHistory& history);

struct LEReport {
  double T = 0.0;
  std::vector<double> per_annulus;  // ||<x>^{-1/2} u||_{L^2 L^2(A_j)}
  double le = 0.0;                  // sup_j of per_annulus
  double le1 = 0.0;                 // ||∂u||_LE + ||<x>^{-1} u||_LE
  double le_star_f = 0.0;           // sum_j ||<x>^{1/2} f||_{L^2 L^2(A_j)}
  double f_l1l2 = 0.0;
  double sup_grad_norm = 0.0;
  double dissipation_residual = 0.0;
  int j_domain = 0;  // annuli beyond this are truncated by the box
};

/// Local-energy norms from the accumulated checkpoint data.
LEReport le_norms(const WaveHistory& history, size_t checkpoint_index);

struct LedRow {
  double T = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  double rho = 0.0;
  double energy_at_T = 0.0;
};

/// rho(T) = (||u||_{LE^1[0,T]} + ||∂u||_{L^inf L^2}) /
///          (||∂u(0)||_{L^2} + ||Pu||_{LE* + L^1 L^2}); with f = 0 the
/// denominator reduces to the data norm.
std::vector<LedRow> led_experiment(const MetricModel& m, const GridSpec& grid,
                                   const WaveData& data, const Forcing& forcing,
                                   const std::vector<double>& t_list, int n_threads = 1);

/// Flat little-endian snapshot dump: header doubles {n, L, dt, count, times...}
/// followed by u then v fields per stored snapshot. A JSON sidecar with the
/// same stem describes the layout.
void write_history_binary(const WaveHistory& history, const std::string& path);

}  // namespace gcwave
