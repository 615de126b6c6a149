#include "gcwave/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "flow_rhs.hpp"
#include "gcwave/parallel.hpp"
#include "gcwave/sampling.hpp"

namespace gcwave {

namespace {

using detail::HalfFieldRhs;
using detail::pack_phase;
using detail::unpack_phase;

// Full bicharacteristic field for p; state (t, tau, x, xi).
struct FullRhs {
  const MetricModel& m;
  void operator()(double, const OdeState<8>& y, OdeState<8>& dy) const {
    MetricJet j;
    const Vec3 x{y[2], y[3], y[4]};
    const Vec3 xi{y[5], y[6], y[7]};
    m.jet(x, j);
    const double tau = y[1];
    const Vec3 gxi = j.g.apply(xi);
    dy[0] = -2.0 * tau + 2.0 * dot(j.g0, xi);
    dy[1] = 0.0;
    for (int k = 0; k < 3; ++k) {
      dy[2 + k] = 2.0 * tau * j.g0[k] + 2.0 * gxi[k];
      dy[5 + k] = -2.0 * tau * dot(j.dg0.row(k), xi) - j.dg[static_cast<size_t>(k)].quad(xi, xi);
    }
  }
};

OdeState<6> pack(const PhasePoint& w) { return pack_phase(w); }
PhasePoint unpack6(const OdeState<6>& y) { return unpack_phase(y); }
OdeState<8> pack(const FullPhasePoint& w) {
  return {w.t, w.tau, w.x[0], w.x[1], w.x[2], w.xi[0], w.xi[1], w.xi[2]};
}
FullPhasePoint unpack8(const OdeState<8>& y) {
  return {y[0], y[1], {y[2], y[3], y[4]}, {y[5], y[6], y[7]}};
}

OdeOptions ode_opts(const FlowOptions& f) {
  OdeOptions o;
  o.rtol = f.rtol;
  o.atol = f.atol;
  return o;
}

}  // namespace

Trajectory integrate_half(const MetricModel& m, Branch br, const PhasePoint& w0, double s_begin,
                          double s_end, const FlowOptions& opt) {
  if (norm2(w0.xi) <= 0.0) throw std::invalid_argument("integrate_half: xi must be nonzero");
  Trajectory tr;
  tr.kind = (br == Branch::plus) ? FlowKind::half_plus : FlowKind::half_minus;
  const double b0 = b_pm(m, w0, br);
  const bool dense = !opt.sample_at.empty();
  if (!dense) {
    tr.s.push_back(s_begin);
    tr.half_states.push_back(w0);
  }
  size_t next_sample = 0;

  HalfFieldRhs rhs{m, br};
  int count = 0;
  auto res = integrate_ode<6>(
      rhs, pack(w0), s_begin, s_end, ode_opts(opt),
      [&](const DenseSegment<6>& seg, const OdeState<6>& y, double s) {
        const PhasePoint w = unpack6(y);
        const double drift = std::abs(b_pm(m, w, br) - b0) / std::max(std::abs(b0), 1e-300);
        tr.conserved_drift = std::max(tr.conserved_drift, drift);
        if (dense) {
          const double dir = (s_end > s_begin) ? 1.0 : -1.0;
          while (next_sample < opt.sample_at.size() &&
                 dir * (s - opt.sample_at[next_sample]) >= 0.0) {
            tr.s.push_back(opt.sample_at[next_sample]);
            tr.half_states.push_back(unpack6(seg.eval(opt.sample_at[next_sample])));
            ++next_sample;
          }
        } else if (++count % opt.sample_stride == 0) {
          tr.s.push_back(s);
          tr.half_states.push_back(w);
        }
        return true;
      });
  if (!dense && tr.s.back() != res.s) {
    tr.s.push_back(res.s);
    tr.half_states.push_back(unpack6(res.y));
  }
  tr.status = res.status;
  tr.valid = (res.status == OdeStatus::ok) && (tr.conserved_drift <= opt.drift_tol);
  return tr;
}

Trajectory integrate_full(const MetricModel& m, const FullPhasePoint& w0, double s_begin,
                          double s_end, const FlowOptions& opt) {
  if (w0.tau == 0.0 && norm2(w0.xi) <= 0.0)
    throw std::invalid_argument("integrate_full: (tau, xi) must be nonzero");
  Trajectory tr;
  tr.kind = FlowKind::full;
  MetricJet j0;
  m.jet(w0.x, j0);
  const double p0 = p_symbol(j0, w0.tau, w0.xi);
  const double p_scale = w0.tau * w0.tau + j0.g.quad(w0.xi, w0.xi);
  const bool dense = !opt.sample_at.empty();
  if (!dense) {
    tr.s.push_back(s_begin);
    tr.full_states.push_back(w0);
  }
  size_t next_sample = 0;

  FullRhs rhs{m};
  int count = 0;
  auto res = integrate_ode<8>(
      rhs, pack(w0), s_begin, s_end, ode_opts(opt),
      [&](const DenseSegment<8>& seg, const OdeState<8>& y, double s) {
        const FullPhasePoint w = unpack8(y);
        const double tau_drift = std::abs(w.tau - w0.tau) / std::max(std::abs(w0.tau), 1e-300);
        const double p_drift = std::abs(p_symbol(m, w) - p0) / std::max(p_scale, 1e-300);
        tr.conserved_drift = std::max({tr.conserved_drift, tau_drift, p_drift});
        if (dense) {
          const double dir = (s_end > s_begin) ? 1.0 : -1.0;
          while (next_sample < opt.sample_at.size() &&
                 dir * (s - opt.sample_at[next_sample]) >= 0.0) {
            tr.s.push_back(opt.sample_at[next_sample]);
            tr.full_states.push_back(unpack8(seg.eval(opt.sample_at[next_sample])));
            ++next_sample;
          }
        } else if (++count % opt.sample_stride == 0) {
          tr.s.push_back(s);
          tr.full_states.push_back(w);
        }
        return true;
      });
  if (!dense && tr.s.back() != res.s) {
    tr.s.push_back(res.s);
    tr.full_states.push_back(unpack8(res.y));
  }
  tr.status = res.status;
  tr.valid = (res.status == OdeStatus::ok) && (tr.conserved_drift <= opt.drift_tol);
  return tr;
}

ReparamReport reparam_match(const MetricModel& m, const FullPhasePoint& w0, double t_window,
                            int n_samples, const FlowOptions& opt) {
  const double p0 = p_symbol(m, w0);
  MetricJet j0;
  m.jet(w0.x, j0);
  const double scale = w0.tau * w0.tau + j0.g.quad(w0.xi, w0.xi);
  if (std::abs(p0) > 1e-8 * scale)
    throw std::invalid_argument("reparam_match: datum is not characteristic (p != 0)");
  ReparamReport rep;
  rep.branch = (w0.tau > 0.0) ? Branch::plus : Branch::minus;

  // The full flow traverses t monotonically with dt/ds = -(2 tau - b+ - b-),
  // negative on the plus branch. Integrate toward growing t.
  FullRhs rhs{m};
  OdeState<8> y0 = pack(w0);
  OdeState<8> dy0;
  rhs(0.0, y0, dy0);
  if (std::abs(dy0[0]) < 1e-300) throw std::runtime_error("reparam_match: stationary t");
  const double s_dir = (dy0[0] > 0.0) ? 1.0 : -1.0;

  std::vector<DenseSegment<8>> segs;
  const double t_end = w0.t + t_window;
  // |dt/ds| = b+ - b- >= 2 sqrt(c_ell) |xi|; bound the s-span generously.
  const double s_span = 4.0 * t_window / std::max(std::abs(dy0[0]), 1e-6) + 1.0;
  auto res = integrate_ode<8>(rhs, y0, 0.0, s_dir * s_span, ode_opts(opt),
                              [&](const DenseSegment<8>& seg, const OdeState<8>& y, double) {
                                segs.push_back(seg);
                                return y[0] < t_end;
                              });
  if (res.status == OdeStatus::max_steps || res.status == OdeStatus::step_underflow)
    throw std::runtime_error("reparam_match: full-flow integration failed");
  if (segs.empty() || segs.back().eval(segs.back().s0 + segs.back().h)[0] < t_end)
    throw std::runtime_error("reparam_match: t window not reached");

  // Half flow from the projected datum; its parameter is t - t0.
  std::vector<DenseSegment<6>> half_segs;
  HalfFieldRhs hrhs{m, rep.branch};
  const PhasePoint pw{w0.x, w0.xi};
  auto hres = integrate_ode<6>(hrhs, pack(pw), 0.0, t_window, ode_opts(opt),
                               [&](const DenseSegment<6>& seg, const OdeState<6>&, double) {
                                 half_segs.push_back(seg);
                                 return true;
                               });
  if (hres.status != OdeStatus::ok)
    throw std::runtime_error("reparam_match: half-flow integration failed");

  auto eval_half = [&](double s) -> OdeState<6> {
    auto it = std::lower_bound(half_segs.begin(), half_segs.end(), s,
                               [](const DenseSegment<6>& seg, double v) {
                                 return seg.s0 + seg.h < v;
                               });
    if (it == half_segs.end()) it = half_segs.end() - 1;
    return it->eval(s);
  };

  // Invert t(s) per sample by bisection inside the covering dense segment.
  size_t si = 0;
  for (int k = 0; k <= n_samples; ++k) {
    const double t_target = w0.t + t_window * k / n_samples;
    while (si + 1 < segs.size()) {
      const auto& seg = segs[si];
      const double t_hi = seg.eval(seg.s0 + seg.h)[0];
      if (t_hi >= t_target) break;
      ++si;
    }
    const auto& seg = segs[si];
    // t increases along the integration direction, from seg.s0 toward
    // seg.s0 + seg.h, whatever the sign of h.
    double lo = seg.s0, hi = seg.s0 + seg.h;
    for (int it = 0; it < 64; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (seg.eval(mid)[0] < t_target)
        lo = mid;
      else
        hi = mid;
    }
    const OdeState<8> yf = seg.eval(0.5 * (lo + hi));
    const OdeState<6> yh = eval_half(t_target - w0.t);
    double dx2 = 0.0, dxi2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      dx2 += (yf[static_cast<size_t>(2 + i)] - yh[static_cast<size_t>(i)]) *
             (yf[static_cast<size_t>(2 + i)] - yh[static_cast<size_t>(i)]);
      dxi2 += (yf[static_cast<size_t>(5 + i)] - yh[static_cast<size_t>(3 + i)]) *
              (yf[static_cast<size_t>(5 + i)] - yh[static_cast<size_t>(3 + i)]);
    }
    rep.max_dev_x = std::max(rep.max_dev_x, std::sqrt(dx2));
    rep.max_dev_xi = std::max(rep.max_dev_xi, std::sqrt(dxi2));
    ++rep.n_samples;
  }
  return rep;
}

namespace {

struct DirectionalRun {
  bool escaped = false;
  double s_escape = 0.0;  // unsigned parameter along this direction
  double min_radius = 0.0;
  double max_radius = 0.0;
  double drift = 0.0;
  double max_damping = 0.0;
  double first_hit_s = -1.0;  // unsigned; negative = never
  bool permanence_ok = true;
  OdeStatus status = OdeStatus::ok;
};

// Integrates one direction (dir = +-1) of a half-wave ray, tracking radius
// extrema, the conserved symbol, damping along the orbit, and the escape
// event with dense refinement.
DirectionalRun run_direction(const MetricModel& m, Branch br, const PhasePoint& w0, double dir,
                             const ClassifyParams& p) {
  DirectionalRun out;
  const double r0 = norm(w0.x);
  out.min_radius = out.max_radius = r0;
  const double thresh = std::max(2.0 * p.R, r0 + p.delta);
  const double b0 = b_pm(m, w0, br);
  const bool track_damping = p.a_threshold > 0.0 && !m.damping_profile().empty();
  if (track_damping) {
    out.max_damping = m.damping(w0.x);
    if (out.max_damping > p.a_threshold) out.first_hit_s = 0.0;
  }

  HalfFieldRhs rhs{m, br};
  DenseSegment<6> crossing_seg;
  bool have_crossing = false;

  auto observe = [&](const OdeState<6>& y, double s_unsigned) {
    const Vec3 x{y[0], y[1], y[2]};
    const double r = norm(x);
    out.min_radius = std::min(out.min_radius, r);
    out.max_radius = std::max(out.max_radius, r);
    const PhasePoint w = unpack6(y);
    const double drift = std::abs(b_pm(m, w, br) - b0) / std::max(std::abs(b0), 1e-300);
    out.drift = std::max(out.drift, drift);
    if (track_damping) {
      const double a = m.damping(x);
      out.max_damping = std::max(out.max_damping, a);
      if (a > p.a_threshold && out.first_hit_s < 0.0) out.first_hit_s = s_unsigned;
    }
    return r;
  };

  auto res = integrate_ode<6>(
      rhs, pack(w0), 0.0, dir * p.t_max, ode_opts(p.flow),
      [&](const DenseSegment<6>& seg, const OdeState<6>& y, double s) {
        // midpoint sample to tighten radius extrema and damping hits
        observe(seg.eval(seg.s0 + 0.5 * seg.h), std::abs(seg.s0 + 0.5 * seg.h));
        const double r = observe(y, std::abs(s));
        if (r >= thresh) {
          crossing_seg = seg;
          have_crossing = true;
          return false;
        }
        return true;
      });
  out.status = (res.status == OdeStatus::stopped_by_callback) ? OdeStatus::ok : res.status;

  if (!have_crossing) return out;

  // Refine the first crossing of |x| = thresh inside the stopping segment.
  double lo = crossing_seg.s0, hi = crossing_seg.s0 + crossing_seg.h;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const OdeState<6> y = crossing_seg.eval(mid);
    if (norm(Vec3{y[0], y[1], y[2]}) < thresh)
      lo = mid;
    else
      hi = mid;
  }
  out.escaped = true;
  out.s_escape = std::abs(0.5 * (lo + hi));

  // Escape permanence: continue 10% beyond s' and require |x| to increase.
  const double s_extra = 0.1 * out.s_escape;
  if (s_extra > 0.0) {
    const OdeState<6> y_cross = crossing_seg.eval(dir * out.s_escape);
    double last_r = norm(Vec3{y_cross[0], y_cross[1], y_cross[2]});
    OdeState<6> y = y_cross;
    double s = dir * out.s_escape;
    for (int k = 1; k <= 8; ++k) {
      const double s_next = dir * (out.s_escape + s_extra * k / 8.0);
      auto cres = integrate_ode<6>(rhs, y, s, s_next, ode_opts(p.flow),
                                   [](const DenseSegment<6>&, const OdeState<6>&, double) {
                                     return true;
                                   });
      y = cres.y;
      s = cres.s;
      const double r = norm(Vec3{y[0], y[1], y[2]});
      if (r <= last_r) out.permanence_ok = false;
      last_r = r;
    }
  }
  return out;
}

}  // namespace

RayClass classify_ray(const MetricModel& m, Branch br, const PhasePoint& w0,
                      const ClassifyParams& p) {
  RayClass rc;
  rc.horizon = p.t_max;
  const double r0 = norm(w0.x);
  rc.min_radius = rc.max_radius = r0;

  const bool fwd = (p.direction != RayDirection::backward);
  const bool bwd = (p.direction != RayDirection::forward);

  bool any_invalid = false;
  bool escaped = false;
  for (int pass = 0; pass < 2; ++pass) {
    const double dir = (pass == 0) ? 1.0 : -1.0;
    if ((dir > 0 && !fwd) || (dir < 0 && !bwd)) continue;
    const DirectionalRun run = run_direction(m, br, w0, dir, p);
    rc.min_radius = std::min(rc.min_radius, run.min_radius);
    rc.max_radius = std::max(rc.max_radius, run.max_radius);
    rc.conserved_drift = std::max(rc.conserved_drift, run.drift);
    rc.max_damping = std::max(rc.max_damping, run.max_damping);
    if (run.first_hit_s >= 0.0 && !rc.hit_damping) {
      rc.hit_damping = true;
      rc.first_hit_s = dir * run.first_hit_s;
    }
    if (run.status != OdeStatus::ok) {
      any_invalid = true;
      rc.diagnostic = (run.status == OdeStatus::step_underflow) ? "step underflow" : "step budget";
    }
    if (run.escaped) {
      escaped = true;
      rc.escape_param = dir * run.s_escape;
      rc.permanence_ok = rc.permanence_ok && run.permanence_ok;
      break;  // not trapped; no need to run the other direction
    }
    if (dir > 0)
      rc.forward_bounded = (run.status == OdeStatus::ok);
    else
      rc.backward_bounded = (run.status == OdeStatus::ok);
  }

  if (rc.conserved_drift > p.flow.drift_tol) {
    any_invalid = true;
    rc.diagnostic = "conserved-symbol drift above tolerance";
  }

  if (escaped && !any_invalid) {
    rc.verdict = RayVerdict::escaped;
  } else if (any_invalid) {
    rc.verdict = RayVerdict::undetermined;
  } else {
    const bool bounded_everywhere = (!fwd || rc.forward_bounded) && (!bwd || rc.backward_bounded);
    rc.verdict = (bounded_everywhere && rc.max_radius <= 2.0 * p.R) ? RayVerdict::trapped
                                                                    : RayVerdict::undetermined;
  }
  return rc;
}

GccReport check_gcc(const MetricModel& m, const std::vector<PhasePoint>& seeds_plus,
                    const std::vector<PhasePoint>& seeds_minus, const ClassifyParams& p,
                    int n_threads) {
  GccReport rep;
  rep.a_threshold = p.a_threshold;
  rep.rays.resize(seeds_plus.size() + seeds_minus.size());

  parallel_for(rep.rays.size(), n_threads, [&](size_t i) {
    const bool plus = i < seeds_plus.size();
    const PhasePoint& seed = plus ? seeds_plus[i] : seeds_minus[i - seeds_plus.size()];
    GccRayRecord rec;
    rec.seed_index = static_cast<int>(plus ? i : i - seeds_plus.size());
    rec.branch = plus ? Branch::plus : Branch::minus;
    rec.seed = seed;
    rec.ray = classify_ray(m, rec.branch, seed, p);
    rep.rays[i] = rec;
  });

  for (const auto& rec : rep.rays) {
    switch (rec.ray.verdict) {
      case RayVerdict::trapped:
        ++rep.n_trapped;
        if (rec.ray.hit_damping) ++rep.n_trapped_hit;
        break;
      case RayVerdict::escaped:
        ++rep.n_escaped;
        break;
      default:
        ++rep.n_undetermined;
    }
    if (rec.ray.verdict != RayVerdict::trapped &&
        (rec.ray.forward_bounded != rec.ray.backward_bounded)) {
      ++rep.n_semi_bounded;
      if (rec.ray.hit_damping) ++rep.n_semi_hit;
    }
  }
  rep.trapped_fraction_hit =
      (rep.n_trapped > 0) ? static_cast<double>(rep.n_trapped_hit) / rep.n_trapped : 1.0;
  return rep;
}

ScalingDeviation verify_flow_scaling(const MetricModel& m, const PhasePoint& w0, double lambda,
                                     Branch br, double s_end, int n_samples,
                                     const FlowOptions& opt) {
  if (lambda <= 0.0) throw std::invalid_argument("verify_flow_scaling: lambda must be positive");
  HalfFieldRhs rhs{m, br};

  auto collect = [&](const PhasePoint& w) {
    std::vector<DenseSegment<6>> segs;
    auto res = integrate_ode<6>(rhs, pack(w), 0.0, s_end, ode_opts(opt),
                                [&](const DenseSegment<6>& seg, const OdeState<6>&, double) {
                                  segs.push_back(seg);
                                  return true;
                                });
    if (res.status != OdeStatus::ok)
      throw std::runtime_error("verify_flow_scaling: integration failed");
    return segs;
  };

  const auto segs_a = collect(w0);
  const auto segs_b = collect({w0.x, lambda * w0.xi});

  auto eval_at = [](const std::vector<DenseSegment<6>>& segs, double s) {
    auto it = std::lower_bound(
        segs.begin(), segs.end(), s,
        [](const DenseSegment<6>& seg, double v) { return seg.s0 + seg.h < v; });
    if (it == segs.end()) it = segs.end() - 1;
    return it->eval(s);
  };

  ScalingDeviation dev;
  for (int k = 0; k <= n_samples; ++k) {
    const double s = s_end * k / n_samples;
    const OdeState<6> ya = eval_at(segs_a, s);
    const OdeState<6> yb = eval_at(segs_b, s);
    double dx2 = 0.0, dxi2 = 0.0;
    for (size_t i = 0; i < 3; ++i) {
      dx2 += (ya[i] - yb[i]) * (ya[i] - yb[i]);
      const double d = lambda * ya[i + 3] - yb[i + 3];
      dxi2 += d * d;
    }
    dev.max_dev_x = std::max(dev.max_dev_x, std::sqrt(dx2));
    dev.max_dev_xi = std::max(dev.max_dev_xi, std::sqrt(dxi2) / lambda);
  }
  return dev;
}

std::vector<CircularOrbit> circular_orbit_radii(const MetricModel& m, double r_lo, double r_hi,
                                                int n_scan) {
  if (r_lo <= 0.0 || r_hi <= r_lo) throw std::invalid_argument("circular_orbit_radii: bad range");
  auto V = [&](double r) {
    return b_pm(m, {{r, 0.0, 0.0}, {0.0, 1.0, 0.0}}, Branch::plus) / r;
  };
  auto Vp = [&](double r) {
    const double h = 1e-6 * r;
    return (V(r + h) - V(r - h)) / (2.0 * h);
  };

  std::vector<CircularOrbit> orbits;
  double prev_r = r_lo, prev_vp = Vp(r_lo);
  for (int i = 1; i <= n_scan; ++i) {
    const double r = r_lo + (r_hi - r_lo) * i / n_scan;
    const double vp = Vp(r);
    if (prev_vp == 0.0 || (prev_vp < 0.0) == (vp < 0.0)) {
      prev_r = r;
      prev_vp = vp;
      continue;
    }
    double lo = prev_r, hi = r, flo = prev_vp;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = Vp(mid);
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    CircularOrbit orb;
    orb.radius = 0.5 * (lo + hi);
    orb.stable = (prev_vp < 0.0);  // V' goes - to +: local minimum of V
    orbits.push_back(orb);
    prev_r = r;
    prev_vp = vp;
  }
  return orbits;
}

std::vector<PhasePoint> gcc_seed_set(const MetricModel& m, Branch br, double R, int n_bulk,
                                     int n_targeted, std::uint64_t rng_seed) {
  std::vector<PhasePoint> seeds;
  seeds.reserve(static_cast<size_t>(n_bulk + n_targeted));
  HaltonSampler halton(7, rng_seed + (br == Branch::plus ? 0 : 1));

  for (int i = 0; i < n_bulk; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const Vec3 x = ball_from_uniform(halton.sample(0, idx), halton.sample(1, idx),
                                     halton.sample(2, idx), 2.0 * R);
    const Vec3 xi = sphere_from_uniform(halton.sample(3, idx), halton.sample(4, idx));
    seeds.push_back(phi_scale(m, {x, xi}, br));
  }

  if (n_targeted > 0) {
    const auto orbits = circular_orbit_radii(m, 0.05 * R, 2.0 * R, 4096);
    if (!orbits.empty()) {
      for (int k = 0; k < n_targeted; ++k) {
        // round-robin over the detected circular orbits
        const auto& orb = orbits[static_cast<size_t>(k) % orbits.size()];
        const auto idx = static_cast<std::uint64_t>(1000000 + k);
        // random great circle: plane normal + position angle
        const Vec3 n = sphere_from_uniform(halton.sample(0, idx), halton.sample(1, idx));
        Vec3 e1 = cross(n, Vec3{0.0, 0.0, 1.0});
        if (norm(e1) < 1e-6) e1 = cross(n, Vec3{1.0, 0.0, 0.0});
        e1 = e1 / norm(e1);
        const Vec3 e2 = cross(n, e1);
        const double th = 2.0 * kPi * halton.sample(2, idx);
        const Vec3 x = orb.radius * (std::cos(th) * e1 + std::sin(th) * e2);
        Vec3 tangent = -std::sin(th) * e1 + std::cos(th) * e2;
        if (k % 2 == 1) tangent = -tangent;
        seeds.push_back(phi_scale(m, {x, tangent}, br));
      }
    }
  }
  return seeds;
}

}  // namespace gcwave
