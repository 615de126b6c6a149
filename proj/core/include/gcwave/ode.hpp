#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace gcwave {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_init = 0.0;  // 0 selects automatically
  std::size_t max_steps = 50000000;
};

enum class OdeStatus { ok, stopped_by_callback, step_underflow, max_steps };

template <std::size_t N>
using OdeState = std::array<double, N>;

/// Quartic continuous extension of one accepted Dormand-Prince step.
template <std::size_t N>
struct DenseSegment {
  double s0 = 0.0;
  double h = 0.0;
  std::array<OdeState<N>, 5> rcont{};

  OdeState<N> eval(double s) const {
    const double th = (s - s0) / h;
    const double th1 = 1.0 - th;
    OdeState<N> y;
    for (std::size_t i = 0; i < N; ++i)
      y[i] = rcont[0][i] +
             th * (rcont[1][i] + th1 * (rcont[2][i] + th * (rcont[3][i] + th1 * rcont[4][i])));
    return y;
  }
};

template <std::size_t N>
struct OdeResult {
  OdeStatus status = OdeStatus::ok;
  OdeState<N> y{};
  double s = 0.0;
  std::size_t n_steps = 0;
  std::size_t n_rejected = 0;
};

/// Adaptive embedded Runge-Kutta 5(4) (Dormand-Prince) with dense output.
/// The callback receives each accepted step's dense segment and may stop the
/// integration by returning false. Results are bitwise deterministic for
/// fixed inputs.
template <std::size_t N, class Rhs, class StepCallback>
OdeResult<N> integrate_ode(Rhs&& rhs, const OdeState<N>& y0, double s0, double s1,
                           const OdeOptions& opt, StepCallback&& on_step) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  OdeResult<N> res;
  res.y = y0;
  res.s = s0;
  if (s1 == s0) return res;
  const double dir = (s1 > s0) ? 1.0 : -1.0;
  const double span = std::abs(s1 - s0);

  OdeState<N> k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
  rhs(s0, res.y, k1);

  double h;
  if (opt.h_init > 0.0) {
    h = dir * std::min(opt.h_init, span);
  } else {
    // crude norm-based first guess, then clipped
    double dy = 0.0, df = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = opt.atol + opt.rtol * std::abs(res.y[i]);
      dy += (res.y[i] / sc) * (res.y[i] / sc);
      df += (k1[i] / sc) * (k1[i] / sc);
    }
    double h0 = (df > 0.0 && dy > 0.0) ? 0.01 * std::sqrt(dy / df) : 1e-6;
    h = dir * std::min({h0, span, 1.0});
  }

  const double h_floor = span * 1e-15;

  while (dir * (s1 - res.s) > 0.0) {
    if (res.n_steps + res.n_rejected >= opt.max_steps) {
      res.status = OdeStatus::max_steps;
      return res;
    }
    if (std::abs(h) < h_floor) {
      res.status = OdeStatus::step_underflow;
      return res;
    }
    if (dir * (res.s + h - s1) > 0.0) h = s1 - res.s;

    const double s = res.s;
    for (std::size_t i = 0; i < N; ++i) ytmp[i] = res.y[i] + h * a21 * k1[i];
    rhs(s + c2 * h, ytmp, k2);
    for (std::size_t i = 0; i < N; ++i) ytmp[i] = res.y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(s + c3 * h, ytmp, k3);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = res.y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(s + c4 * h, ytmp, k4);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = res.y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(s + c5 * h, ytmp, k5);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = res.y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    rhs(s + h, ytmp, k6);
    for (std::size_t i = 0; i < N; ++i)
      ynew[i] = res.y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    rhs(s + h, ynew, k7);

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double e =
          h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = opt.atol + opt.rtol * std::max(std::abs(res.y[i]), std::abs(ynew[i]));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / static_cast<double>(N));

    if (err <= 1.0) {
      DenseSegment<N> seg;
      seg.s0 = s;
      seg.h = h;
      for (std::size_t i = 0; i < N; ++i) {
        const double dyi = ynew[i] - res.y[i];
        seg.rcont[0][i] = res.y[i];
        seg.rcont[1][i] = dyi;
        seg.rcont[2][i] = h * k1[i] - dyi;
        seg.rcont[3][i] = dyi - h * k7[i] - seg.rcont[2][i];
        seg.rcont[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                               d7 * k7[i]);
      }
      res.y = ynew;
      res.s = s + h;
      ++res.n_steps;
      k1 = k7;  // FSAL
      if (!on_step(seg, res.y, res.s)) {
        res.status = OdeStatus::stopped_by_callback;
        return res;
      }
      const double fac = std::clamp(0.9 * std::pow(err > 1e-30 ? err : 1e-30, -0.2), 0.2, 5.0);
      h *= fac;
    } else {
      ++res.n_rejected;
      h *= std::max(0.1, 0.9 * std::pow(err, -0.2));
    }
  }
  return res;
}

}  // namespace gcwave
