#include "gcwave/halfwave.hpp"

#include <cmath>
#include <stdexcept>

namespace gcwave {

double p_symbol(const MetricJet& j, double tau, const Vec3& xi) {
  const double s = dot(j.g0, xi);
  const double q = j.g.quad(xi, xi);
  return -(tau * tau - 2.0 * tau * s - q);
}

double p_symbol(const MetricModel& m, const FullPhasePoint& w) {
  MetricJet j;
  m.jet(w.x, j);
  return p_symbol(j, w.tau, w.xi);
}

double b_pm(const MetricJet& j, const Vec3& xi, Branch br) {
  const double s = dot(j.g0, xi);
  const double q = j.g.quad(xi, xi);
  return s + branch_sign(br) * std::sqrt(s * s + q);
}

double b_pm(const MetricModel& m, const PhasePoint& pt, Branch br) {
  MetricJet j;
  m.jet(pt.x, j);
  return b_pm(j, pt.xi, br);
}

BValue b_pm_grad(const MetricJet& j, const Vec3& xi, Branch br) {
  const double sg = branch_sign(br);
  const double s = dot(j.g0, xi);
  const double q = j.g.quad(xi, xi);
  const double w = std::sqrt(s * s + q);
  if (w <= 0.0) throw std::runtime_error("b_pm_grad: degenerate radicand (zero section?)");

  BValue out;
  out.b = s + sg * w;
  // xi derivatives: d_xi s = g^{0k}, d_xi q = 2 g^{kj} xi_j
  const Vec3 gxi = j.g.apply(xi);
  for (int k = 0; k < 3; ++k) out.dxi[k] = j.g0[k] + sg * (s * j.g0[k] + gxi[k]) / w;
  // x derivatives via coefficient gradients
  for (int k = 0; k < 3; ++k) {
    const double ds = dot(j.dg0.row(k), xi);
    const double dq = j.dg[static_cast<size_t>(k)].quad(xi, xi);
    out.dx[k] = ds + sg * (s * ds + 0.5 * dq) / w;
  }
  return out;
}

BValue b_pm_grad(const MetricModel& m, const PhasePoint& pt, Branch br) {
  MetricJet j;
  m.jet(pt.x, j);
  return b_pm_grad(j, pt.xi, br);
}

PhasePoint phi_scale(const MetricModel& m, const PhasePoint& pt, Branch br) {
  const double b = b_pm(m, pt, br);
  return {pt.x, pt.xi / std::abs(b)};
}

BScaleBounds estimate_b_scale(const MetricModel& m, double x_radius, int n_samples) {
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  double lo = 1e300, hi = 0.0;
  const int n_dir = 64;
  const int n_pos = std::max(8, n_samples / n_dir);
  for (int ip = 0; ip < n_pos; ++ip) {
    // radial positions biased toward the interior where coefficients vary
    const double r = x_radius * (ip + 0.5) / n_pos;
    const double zp = 1.0 - (2.0 * ip + 1.0) / n_pos;
    const double rho = std::sqrt(std::max(0.0, 1.0 - zp * zp));
    const double php = 2.0 * kPi * std::fmod(ip / golden, 1.0);
    const Vec3 x = r * Vec3{rho * std::cos(php), rho * std::sin(php), zp};
    MetricJet j;
    m.jet(x, j);
    for (int id = 0; id < n_dir; ++id) {
      const double z = 1.0 - (2.0 * id + 1.0) / n_dir;
      const double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = 2.0 * kPi * std::fmod(id / golden, 1.0);
      const Vec3 xi{rr * std::cos(phi), rr * std::sin(phi), z};
      for (Branch br : {Branch::plus, Branch::minus}) {
        const double b = std::abs(b_pm(j, xi, br));
        lo = std::min(lo, b);
        hi = std::max(hi, b);
      }
    }
  }
  return {lo * 0.9, hi * 1.1};
}

}  // namespace gcwave
