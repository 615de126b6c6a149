#pragma once

#include "gcwave/metric.hpp"

namespace gcwave {

/// Point of T*R^3 minus the zero section.
struct PhasePoint {
  Vec3 x;
  Vec3 xi;
};

/// Point of T*R^4; (tau, xi) != (0, 0).
struct FullPhasePoint {
  double t = 0.0;
  double tau = 0.0;
  Vec3 x;
  Vec3 xi;
};

enum class Branch { plus, minus };

inline double branch_sign(Branch b) { return b == Branch::plus ? 1.0 : -1.0; }
inline Branch other(Branch b) { return b == Branch::plus ? Branch::minus : Branch::plus; }
inline const char* branch_name(Branch b) { return b == Branch::plus ? "+" : "-"; }

/// p(tau, x, xi) = -(tau^2 - 2 tau g^{0j} xi_j - g^{ij} xi_i xi_j).
double p_symbol(const MetricModel& m, const FullPhasePoint& w);
double p_symbol(const MetricJet& j, double tau, const Vec3& xi);

/// Half-wave symbol value with analytic first derivatives.
struct BValue {
  double b = 0.0;
  Vec3 dx;   // grad_x b
  Vec3 dxi;  // grad_xi b
};

/// b_pm = g^{0j} xi_j +- sqrt((g^{0j} xi_j)^2 + g^{ij} xi_i xi_j).
double b_pm(const MetricModel& m, const PhasePoint& pt, Branch br);
double b_pm(const MetricJet& j, const Vec3& xi, Branch br);
BValue b_pm_grad(const MetricJet& j, const Vec3& xi, Branch br);
BValue b_pm_grad(const MetricModel& m, const PhasePoint& pt, Branch br);

/// Phi_pm(x, xi) = (x, xi / |b_pm(x, xi)|); idempotent by homogeneity.
PhasePoint phi_scale(const MetricModel& m, const PhasePoint& pt, Branch br);

/// Bounds c_b <= |b_pm(x, xi/|xi|)| <= C_b estimated over a dense sample and
/// padded by 10%.
struct BScaleBounds {
  double c_b = 1.0;
  double C_b = 1.0;
};
BScaleBounds estimate_b_scale(const MetricModel& m, double x_radius, int n_samples = 4096);

}  // namespace gcwave
