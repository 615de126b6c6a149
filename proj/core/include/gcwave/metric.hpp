#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gcwave/math.hpp"

namespace gcwave {

/// Inverse-metric coefficient data at a point: values and first derivatives.
/// The normalization g^{00} = -1 is implicit and never stored.
struct MetricJet {
  Vec3 g0;                 // g^{0j}
  Sym3 g;                  // g^{ij}
  Mat3 dg0;                // dg0(k,j) = d_k g^{0j}
  std::array<Sym3, 3> dg;  // dg[k](i,j) = d_k g^{ij}
};

/// Geometry interface for user-supplied metrics. Implementations must be
/// stationary (no t dependence), return finite values for finite x, and
/// provide analytic first derivatives.
class MetricGeometry {
 public:
  virtual ~MetricGeometry() = default;
  virtual void jet(const Vec3& x, MetricJet& out) const = 0;
  virtual double c_ell() const = 0;
  virtual double C_ell() const = 0;
  virtual bool has_cross_terms() const = 0;
  virtual std::string name() const = 0;
};

struct DampingBall {
  Vec3 center;
  double radius = 1.0;
  double amplitude = 1.0;
};

/// Nonnegative damping coefficient a(x), a sum of smooth compactly
/// supported bumps. a == 0 outside support_radius().
class DampingProfile {
 public:
  DampingProfile() = default;
  explicit DampingProfile(std::vector<DampingBall> balls);

  double operator()(const Vec3& x) const;
  double support_radius() const { return support_radius_; }
  /// Deterministic estimate of sup a (exact for non-overlapping balls).
  double max_value() const { return max_value_; }
  bool empty() const { return balls_.empty(); }
  const std::vector<DampingBall>& balls() const { return balls_; }

 private:
  std::vector<DampingBall> balls_;
  double support_radius_ = 0.0;
  double max_value_ = 0.0;
};

/// Stationary asymptotically flat geometry plus damping profile. Immutable
/// after construction; cheap to copy and safe to share across threads.
class MetricModel {
 public:
  MetricModel(std::shared_ptr<const MetricGeometry> geometry, DampingProfile damping,
              double damping_gain = 1.0);

  static MetricModel minkowski();
  /// g^{ij}(x) = w(r) delta^{ij} with w(r) = 1 + A exp(-(r-r_c)^2/width^2).
  /// Strong enough bumps (A ~ 2) produce trapped rays near the shell.
  static MetricModel trapped_shell(double amplitude, double r_c, double width);
  /// Adds cross terms g^{0j}(x) = eps * exp(-|x|^2) * (-x_2, x_1, 0)_j.
  static MetricModel crossterm_toy(double eps);

  MetricModel with_damping(DampingProfile damping) const;

  void jet(const Vec3& x, MetricJet& out) const { geometry_->jet(x, out); }
  Vec3 g0j(const Vec3& x) const;
  Sym3 gij(const Vec3& x) const;
  double damping(const Vec3& x) const { return damping_(x); }
  const DampingProfile& damping_profile() const { return damping_; }
  double damping_support_radius() const { return damping_.support_radius(); }
  /// Operator-level multiplier on the damping term (grows under scaling).
  double damping_gain() const { return damping_gain_; }

  double c_ell() const { return geometry_->c_ell(); }
  double C_ell() const { return geometry_->C_ell(); }
  bool has_cross_terms() const { return geometry_->has_cross_terms(); }
  std::string name() const { return geometry_->name(); }
  const std::shared_ptr<const MetricGeometry>& geometry() const { return geometry_; }

 private:
  std::shared_ptr<const MetricGeometry> geometry_;
  DampingProfile damping_;
  double damping_gain_ = 1.0;
};

/// Returns the model with g~(x) = g(gamma x), a~(x) = a(gamma x), gradients
/// rescaled by the chain rule, and the operator damping gain multiplied by gamma.
MetricModel scale_metric(const MetricModel& m, double gamma);

struct AFOptions {
  double threshold = 0.1;  // smallness bar defining R0
  double delta = 0.1;      // slow-variation exponent for the c_j envelope
  double floor = 1e-5;     // lower floor applied when building c_seq
  double fd_step = 1e-4;   // relative step for second-derivative differencing
};

/// Dyadic asymptotic-flatness smallness data.
struct AFEstimate {
  double R0 = 1.0;
  int j0 = 0;  // R0 = 2^j0
  double threshold = 0.1;
  double delta = 0.1;
  std::vector<double> measured;  // raw per-annulus sup of the weighted coefficient sums
  std::vector<double> c_seq;     // slowly-varying floored majorant of the tail (j >= j0)
  double c_total = 0.0;          // sum of c_seq over j >= j0
};

/// Measures per-annulus AF smallness on A_j = {<x> in [2^j, 2^{j+1})} by
/// deterministic sampling; second derivatives come from one level of central
/// differencing of the stored gradient fields. Throws if no annulus tail
/// stays below the threshold up to j_max.
AFEstimate estimate_af(const MetricModel& m, int j_max, int samples_per_annulus,
                       const AFOptions& opt = {});

/// Min/max of g^{ij} xi_i xi_j over deterministically sampled unit xi and x.
struct EllipticitySample {
  double min_q;
  double max_q;
};
EllipticitySample sample_ellipticity(const MetricModel& m, int n_samples, double x_radius,
                                     unsigned long long seed);

}  // namespace gcwave
