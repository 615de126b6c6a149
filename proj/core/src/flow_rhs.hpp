#pragma once

// Internal Hamiltonian right-hand sides shared by flow.cpp and escape.cpp.

#include "gcwave/halfwave.hpp"
#include "gcwave/ode.hpp"

namespace gcwave::detail {

// Half-wave field: xdot = -grad_xi b, xidot = +grad_x b. State (x, xi).
struct HalfFieldRhs {
  const MetricModel& m;
  Branch br;
  void operator()(double, const OdeState<6>& y, OdeState<6>& dy) const {
    MetricJet j;
    m.jet(Vec3{y[0], y[1], y[2]}, j);
    const BValue b = b_pm_grad(j, Vec3{y[3], y[4], y[5]}, br);
    dy[0] = -b.dxi[0];
    dy[1] = -b.dxi[1];
    dy[2] = -b.dxi[2];
    dy[3] = b.dx[0];
    dy[4] = b.dx[1];
    dy[5] = b.dx[2];
  }
};

// Time-reversed half-wave field: the solution at parameter u >= 0 equals the
// half flow at -u.
struct BackwardHalfFieldRhs {
  const MetricModel& m;
  Branch br;
  void operator()(double, const OdeState<6>& y, OdeState<6>& dy) const {
    MetricJet j;
    m.jet(Vec3{y[0], y[1], y[2]}, j);
    const BValue b = b_pm_grad(j, Vec3{y[3], y[4], y[5]}, br);
    dy[0] = b.dxi[0];
    dy[1] = b.dxi[1];
    dy[2] = b.dxi[2];
    dy[3] = -b.dx[0];
    dy[4] = -b.dx[1];
    dy[5] = -b.dx[2];
  }
};

inline OdeState<6> pack_phase(const PhasePoint& w) {
  return {w.x[0], w.x[1], w.x[2], w.xi[0], w.xi[1], w.xi[2]};
}

inline PhasePoint unpack_phase(const OdeState<6>& y) {
  return {{y[0], y[1], y[2]}, {y[3], y[4], y[5]}};
}

}  // namespace gcwave::detail
