#include "gcwave/escape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "flow_rhs.hpp"
#include "gcwave/parallel.hpp"
#include "gcwave/sampling.hpp"

namespace gcwave {

namespace {

constexpr double kGl4Node[2] = {0.3399810435848563, 0.8611363115940526};
constexpr double kGl4Weight[2] = {0.6521451548625461, 0.3478548451374538};

double clamped_exp(double x) { return std::exp(std::clamp(x, -200.0, 200.0)); }

// chi_{>lambda}: 0 for y <= lambda, 1 for y >= 2 lambda.
double chi_above(double y, double lambda) { return smoothstep3(y / lambda - 1.0); }

double phase_dist(const PhasePoint& a, const PhasePoint& b) {
  return std::sqrt(norm2(a.x - b.x) + norm2(a.xi - b.xi));
}

double cover_chi(const CoverElement& e, const PhasePoint& z) {
  return plateau(phase_dist(e.seed, z), e.chi_inner, e.chi_outer);
}

// psi: spatial plateau covering {|x| <= R} (support out to 1.5R so the
// sphere |x| = R itself carries full weight), |xi| window around the
// Phi-image range, minus a radial collar around the detected trapped set.
double eval_psi(const QInPart& p, const PhasePoint& z) {
  const double r = norm(z.x);
  const double spatial = plateau(r, p.R, 1.5 * p.R);
  if (spatial == 0.0) return 0.0;
  const double y = norm(z.xi);
  const double up = smoothstep3((y - (p.xi_lo - p.delta_w)) / (0.5 * p.delta_w));
  const double down = smoothstep3(((p.xi_hi + 1.0) - y) / 0.5);
  double v = spatial * up * down;
  if (v == 0.0 || !p.excl_active) return v;
  double excl = 0.0;
  if (r >= p.excl_r_lo && r <= p.excl_r_hi)
    excl = 1.0;
  else if (r < p.excl_r_lo)
    excl = smoothstep3((r - (p.excl_r_lo - p.excl_margin)) / p.excl_margin);
  else
    excl = smoothstep3(((p.excl_r_hi + p.excl_margin) - r) / p.excl_margin);
  return v * (1.0 - excl);
}

// Adaptive Simpson over one dense segment range; the integrand is only C^3
// (smoothstep cutoffs), so fixed-order panels would leave a quadrature phase
// error that pollutes finite differences of the symbol.
template <class Fn>
double simpson_rec(const DenseSegment<6>& seg, Fn&& fn, double a, double b, double fa, double fm,
                   double fb, double whole, double tol, int depth) {
  const double m1 = 0.5 * (a + 0.5 * (a + b));
  const double m2 = 0.5 * (0.5 * (a + b) + b);
  const double fl = fn(seg.eval(m1));
  const double fr = fn(seg.eval(m2));
  const double mid = 0.5 * (a + b);
  const double left = (b - a) / 12.0 * (fa + 4.0 * fl + fm);
  const double right = (b - a) / 12.0 * (fm + 4.0 * fr + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(seg, fn, a, mid, fa, fl, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(seg, fn, mid, b, fm, fr, fb, right, 0.5 * tol, depth - 1);
}

template <class Fn>
double integrate_segment(const DenseSegment<6>& seg, double a, double b, Fn&& fn, double tol) {
  const double fa = fn(seg.eval(a));
  const double fm = fn(seg.eval(0.5 * (a + b)));
  const double fb = fn(seg.eval(b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(seg, fn, a, b, fa, fm, fb, whole, tol, 18);
}

}  // namespace

// ---------------------------------------------------------------------------
// BootstrapWeight
// ---------------------------------------------------------------------------

BootstrapWeight::BootstrapWeight(const AFEstimate& af, double sigma) : sigma_(sigma), r0_(af.R0) {
  if (sigma <= 0.0) throw std::invalid_argument("BootstrapWeight: sigma must be positive");
  if (af.c_seq.empty()) throw std::invalid_argument("BootstrapWeight: empty c sequence");

  std::vector<double> cj = af.c_seq;
  bool all_zero = true;
  for (double v : cj)
    if (v > 0.0) all_zero = false;
  if (all_zero) {
    zero_substituted_ = true;
    for (double& v : cj) v = 1e-12;
  } else {
    for (double& v : cj) v = std::max(v, 1e-12);
  }

  // Knots at dyadic midpoints in u = log2 s, values 1.5 c_j so the
  // interpolant stays inside (c_j, 2 c_j) for slowly-varying sequences.
  const size_t n = cj.size();
  knot_u_.resize(n);
  knot_logc_.resize(n);
  for (size_t j = 0; j < n; ++j) {
    knot_u_[j] = static_cast<double>(j) + 0.5;
    knot_logc_[j] = std::log(1.5 * cj[j]);
  }

  // Monotonicity-limited slopes (Fritsch-Carlson) in log space.
  knot_slope_.assign(n, 0.0);
  if (n >= 2) {
    std::vector<double> sec(n - 1);
    for (size_t j = 0; j + 1 < n; ++j) sec[j] = knot_logc_[j + 1] - knot_logc_[j];
    knot_slope_[0] = sec[0];
    knot_slope_[n - 1] = sec[n - 2];
    for (size_t j = 1; j + 1 < n; ++j) {
      if (sec[j - 1] * sec[j] <= 0.0)
        knot_slope_[j] = 0.0;
      else
        knot_slope_[j] = 2.0 * sec[j - 1] * sec[j] / (sec[j - 1] + sec[j]);
    }
  }

  // Cumulative integral of c(2^u) ln2 du at the knots (f's exponent),
  // anchored at u = 0 (s = 1); composite Simpson per unit segment.
  cum_integral_.assign(n, 0.0);
  const double c0 = std::exp(knot_logc_[0]);
  cum_integral_[0] = knot_u_[0] * c0 * std::numbers::ln2_v<double>;
  auto simpson = [&](double a, double b) {
    const int k = 64;
    const double h = (b - a) / k;
    double acc = std::exp(eval_logc(a)) + std::exp(eval_logc(b));
    for (int i = 1; i < k; ++i)
      acc += std::exp(eval_logc(a + i * h)) * ((i % 2) ? 4.0 : 2.0);
    return acc * h / 3.0 * std::numbers::ln2_v<double>;
  };
  for (size_t j = 1; j < n; ++j)
    cum_integral_[j] = cum_integral_[j - 1] + simpson(knot_u_[j - 1], knot_u_[j]);
}

double BootstrapWeight::eval_logc(double u) const {
  if (u <= knot_u_.front()) return knot_logc_.front();
  if (u >= knot_u_.back()) return knot_logc_.back();
  size_t j = static_cast<size_t>(
      std::upper_bound(knot_u_.begin(), knot_u_.end(), u) - knot_u_.begin() - 1);
  const double t = (u - knot_u_[j]) / (knot_u_[j + 1] - knot_u_[j]);
  const double y0 = knot_logc_[j], y1 = knot_logc_[j + 1];
  const double m0 = knot_slope_[j], m1 = knot_slope_[j + 1];
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 +
         (t3 - t2) * m1;
}

double BootstrapWeight::c_at(double s) const {
  if (s <= 0.0) throw std::invalid_argument("BootstrapWeight::c_at: s must be positive");
  return std::exp(eval_logc(std::log2(s)));
}

double BootstrapWeight::f(double r) const {
  if (r <= 0.0) throw std::invalid_argument("BootstrapWeight::f: r must be positive");
  const double u = std::log2(r);
  double integral;
  if (u <= knot_u_.front()) {
    integral = u * std::exp(knot_logc_.front()) * std::numbers::ln2_v<double>;
  } else {
    size_t j = static_cast<size_t>(
        std::upper_bound(knot_u_.begin(), knot_u_.end(), u) - knot_u_.begin() - 1);
    j = std::min(j, knot_u_.size() - 1);
    // partial composite Simpson on [knot_j, u]
    const double a = knot_u_[j];
    const int k = 32;
    const double h = (u - a) / k;
    double acc = 0.0;
    if (h > 0.0) {
      acc = std::exp(eval_logc(a)) + std::exp(eval_logc(u));
      for (int i = 1; i < k; ++i)
        acc += std::exp(eval_logc(a + i * h)) * ((i % 2) ? 4.0 : 2.0);
      acc *= h / 3.0 * std::numbers::ln2_v<double>;
    }
    integral = cum_integral_[j] + acc;
  }
  return std::exp(sigma_ * integral);
}

// ---------------------------------------------------------------------------
// Semi-bounded cover
// ---------------------------------------------------------------------------

SemiboundedCover build_q_semibounded(const MetricModel& m, Branch br,
                                     const std::vector<PhasePoint>& trapped_seeds,
                                     const EscapeOptions& opt) {
  SemiboundedCover cover;
  cover.branch = br;
  if (trapped_seeds.empty()) return cover;

  const double a_thresh =
      opt.a_threshold > 0.0 ? opt.a_threshold : 1e-6 * m.damping_profile().max_value();
  if (a_thresh <= 0.0)
    throw std::runtime_error("build_q_semibounded: damping is identically zero");

  struct HitData {
    PhasePoint seed;
    double s_hit;
    double alpha;
  };
  std::vector<HitData> hits;
  hits.reserve(trapped_seeds.size());

  detail::HalfFieldRhs rhs{m, br};
  OdeOptions oo;
  oo.rtol = opt.flow.rtol;
  oo.atol = opt.flow.atol;

  for (const auto& raw : trapped_seeds) {
    const PhasePoint seed = phi_scale(m, raw, br);
    // One forward pass collecting a(x_s) along the orbit.
    std::vector<std::pair<double, double>> a_samples;
    a_samples.emplace_back(0.0, m.damping(seed.x));
    auto res = integrate_ode<6>(rhs, detail::pack_phase(seed), 0.0, opt.cover_horizon, oo,
                                [&](const DenseSegment<6>& seg, const OdeState<6>& y, double s) {
                                  const auto ymid = seg.eval(seg.s0 + 0.5 * seg.h);
                                  a_samples.emplace_back(seg.s0 + 0.5 * seg.h,
                                                         m.damping(Vec3{ymid[0], ymid[1], ymid[2]}));
                                  a_samples.emplace_back(s, m.damping(Vec3{y[0], y[1], y[2]}));
                                  return true;
                                });
    if (res.status != OdeStatus::ok)
      throw std::runtime_error("build_q_semibounded: orbit integration failed");
    double a_max = 0.0;
    for (const auto& [s, a] : a_samples) a_max = std::max(a_max, a);
    if (a_max < a_thresh) {
      std::ostringstream ss;
      ss << "build_q_semibounded: seed x=(" << raw.x[0] << "," << raw.x[1] << "," << raw.x[2]
         << ") xi=(" << raw.xi[0] << "," << raw.xi[1] << "," << raw.xi[2]
         << ") never meets {a > " << a_thresh << "} within horizon " << opt.cover_horizon
         << " (geometric control violated for the chosen cover)";
      throw std::runtime_error(ss.str());
    }
    // Any hit time works; prefer the earliest with a healthy damping level
    // (small absorption constant C_w and a cutoff that validates easily).
    const double target = std::max(a_thresh, 0.25 * a_max);
    double s_hit = 0.0;
    for (const auto& [s, a] : a_samples) {
      if (a >= target) {
        s_hit = s;
        break;
      }
    }
    // alpha = a(x_{s_hit}) / 2
    double a_at_hit = m.damping(seed.x);
    if (s_hit > 0.0) {
      auto r2 = integrate_ode<6>(rhs, detail::pack_phase(seed), 0.0, s_hit, oo,
                                 [](const DenseSegment<6>&, const OdeState<6>&, double) {
                                   return true;
                                 });
      a_at_hit = m.damping(Vec3{r2.y[0], r2.y[1], r2.y[2]});
    }
    hits.push_back({seed, s_hit, 0.5 * a_at_hit});
  }

  // Greedy cover ordered by damping-hit time.
  std::vector<size_t> order(hits.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return hits[a].s_hit < hits[b].s_hit; });
  for (size_t oi : order) {
    const auto& h = hits[oi];
    bool close = false;
    for (const auto& e : cover.elems)
      if (phase_dist(e.seed, h.seed) < opt.cover_radius) close = true;
    if (close) continue;

    CoverElement e;
    e.seed = h.seed;
    e.s_hit = h.s_hit;
    e.alpha = h.alpha;
    e.weight_C = 2.0 / h.alpha;
    e.chi_inner = opt.chi_inner;
    e.chi_outer = opt.chi_outer;

    // Shrink the cutoff until the forward image of its support sits inside
    // {a > alpha}; this is the absorption support property of the cover.
    HaltonSampler hs(6, 17);
    bool placed = false;
    for (int attempt = 0; attempt < 14 && !placed; ++attempt) {
      bool ok = true;
      for (int k = 0; k < opt.cover_validation_samples && ok; ++k) {
        const auto idx = static_cast<std::uint64_t>(k);
        Vec3 dx = ball_from_uniform(hs.sample(0, idx), hs.sample(1, idx), hs.sample(2, idx),
                                    e.chi_outer);
        Vec3 dxi = ball_from_uniform(hs.sample(3, idx), hs.sample(4, idx), hs.sample(5, idx),
                                     e.chi_outer);
        PhasePoint z{e.seed.x + dx, e.seed.xi + dxi};
        Vec3 x_end = z.x;
        if (e.s_hit > 0.0) {
          auto rr = integrate_ode<6>(rhs, detail::pack_phase(z), 0.0, e.s_hit, oo,
                                     [](const DenseSegment<6>&, const OdeState<6>&, double) {
                                       return true;
                                     });
          x_end = Vec3{rr.y[0], rr.y[1], rr.y[2]};
        }
        if (m.damping(x_end) <= e.alpha) ok = false;
      }
      if (ok) {
        placed = true;
      } else {
        e.chi_inner *= 0.5;
        e.chi_outer *= 0.5;
      }
    }
    if (!placed)
      throw std::runtime_error(
          "build_q_semibounded: could not validate a cutoff neighborhood (damping too thin "
          "around the cover seed)");
    cover.elems.push_back(e);
  }

  for (const auto& e : cover.elems) {
    cover.C_pm += e.weight_C;
    cover.s_max = std::max(cover.s_max, e.s_hit);
  }
  return cover;
}

// ---------------------------------------------------------------------------
// Interior non-trapped part
// ---------------------------------------------------------------------------

QInPart build_q_in_part(const MetricModel& m, double R, const BScaleBounds& bscale,
                        bool excl_active, double excl_r_lo, double excl_r_hi,
                        const EscapeOptions& opt) {
  QInPart part;
  part.R = R;
  part.xi_lo = 1.0 / bscale.C_b;
  part.xi_hi = 1.0 / bscale.c_b;
  part.delta_w = opt.psi_delta_frac * part.xi_lo;
  part.excl_active = excl_active;
  part.excl_r_lo = excl_r_lo;
  part.excl_r_hi = excl_r_hi;
  part.excl_margin = opt.excl_margin;
  part.escape_delta = 0.1 * R;

  const double guard = (opt.transit_guard > 0.0) ? opt.transit_guard : 40.0 * R;
  OdeOptions oo;
  oo.rtol = opt.flow.rtol;
  oo.atol = opt.flow.atol;

  HaltonSampler hs(6, 23);
  double max_transit = 0.0;
  int kept = 0;
  std::uint64_t idx = 0;
  const std::uint64_t idx_cap = static_cast<std::uint64_t>(opt.n_transit_samples) * 64;
  while (kept < opt.n_transit_samples && idx < idx_cap) {
    const Vec3 x = ball_from_uniform(hs.sample(0, idx), hs.sample(1, idx), hs.sample(2, idx), R);
    const double mag =
        (part.xi_lo - part.delta_w) +
        hs.sample(5, idx) * ((part.xi_hi + 1.0) - (part.xi_lo - part.delta_w));
    const Vec3 xi = mag * sphere_from_uniform(hs.sample(3, idx), hs.sample(4, idx));
    ++idx;
    const PhasePoint z{x, xi};
    if (eval_psi(part, z) < 0.05) continue;
    ++kept;

    for (Branch br : {Branch::plus, Branch::minus}) {
      for (double dir : {1.0, -1.0}) {
        detail::HalfFieldRhs rhs{m, br};
        double inside = 0.0;
        const double esc = std::max(2.0 * R, norm(x) + part.escape_delta);
        auto res = integrate_ode<6>(
            rhs, detail::pack_phase(z), 0.0, dir * guard, oo,
            [&](const DenseSegment<6>& seg, const OdeState<6>& y, double) {
              const auto ymid = seg.eval(seg.s0 + 0.5 * seg.h);
              const bool in_mid = eval_psi(part, detail::unpack_phase(ymid)) > 1e-4;
              const bool in_end = eval_psi(part, detail::unpack_phase(y)) > 1e-4;
              if (in_mid || in_end) inside += std::abs(seg.h);
              return norm(Vec3{y[0], y[1], y[2]}) < esc;
            });
        if (res.status == OdeStatus::ok) {
          // Horizon hit without escape: the sampled ray lingers.
          std::ostringstream ss;
          ss << "build_q_in_part: sampled ray from x=(" << x[0] << "," << x[1] << "," << x[2]
             << "), xi=(" << xi[0] << "," << xi[1] << "," << xi[2] << ") branch "
             << branch_name(br) << " did not leave within guard " << guard
             << " (psi support touches the trapped set)";
          throw std::runtime_error(ss.str());
        }
        if (res.status != OdeStatus::stopped_by_callback)
          throw std::runtime_error("build_q_in_part: transit integration failed");
        max_transit = std::max(max_transit, inside);
      }
    }
  }
  if (kept == 0)
    throw std::runtime_error("build_q_in_part: psi support is empty under the given windows");

  part.transit_bound = 2.0 * max_transit;
  part.cap = part.transit_bound + 4.0 * R;
  return part;
}

// ---------------------------------------------------------------------------
// EscapeAssembly
// ---------------------------------------------------------------------------

EscapeAssembly::EscapeAssembly(MetricModel m, BootstrapWeight f, SemiboundedCover cover_plus,
                               SemiboundedCover cover_minus, QInPart q_in, EscapeParams params,
                               EscapeOptions opt)
    : metric_(std::move(m)),
      f_(std::move(f)),
      cover_plus_(std::move(cover_plus)),
      cover_minus_(std::move(cover_minus)),
      q_in_(q_in),
      params_(params),
      opt_(opt) {}

double EscapeAssembly::cutoff(const PhasePoint& pt, Branch br) const {
  return chi_above(std::abs(b_pm(metric_, pt, br)), params_.lambda);
}

double EscapeAssembly::q1(const PhasePoint& pt, Branch br) const {
  const SemiboundedCover& cov = cover(br);
  if (cov.elems.empty() || cov.s_max <= 0.0) return 0.0;
  const PhasePoint z = phi_scale(metric_, pt, br);

  OdeOptions oo;
  oo.rtol = opt_.flow.rtol;
  oo.atol = opt_.flow.atol;
  detail::BackwardHalfFieldRhs rhs{metric_, br};
  double acc = 0.0;
  integrate_ode<6>(rhs, detail::pack_phase(z), 0.0, cov.s_max, oo,
                   [&](const DenseSegment<6>& seg, const OdeState<6>&, double) {
                     const double lo = seg.s0;
                     const double hi = seg.s0 + seg.h;
                     for (const auto& e : cov.elems) {
                       if (e.s_hit <= lo) continue;
                       const double b = std::min(hi, e.s_hit);
                       if (b <= lo) continue;
                       acc += integrate_segment(
                           seg, lo, b,
                           [&](const OdeState<6>& y) {
                             return cover_chi(e, detail::unpack_phase(y));
                           },
                           1e-12 * std::max(1.0, b - lo));
                     }
                     return true;
                   });
  return acc;
}

double EscapeAssembly::q_out(const PhasePoint& pt, Branch br) const {
  const double r = norm(pt.x);
  const double chi = 1.0 - plateau(r, q_in_.R, 2.0 * q_in_.R);
  if (chi == 0.0 || r < 1e-12) return 0.0;
  const BValue b = b_pm_grad(metric_, pt, br);
  return -chi * f_.f(r) * dot(b.dxi, pt.x) / r;
}

namespace {

// Half flow augmented with the running integral of psi, so the quadrature
// error is controlled by the integrator itself.
struct PsiFlowRhs {
  const MetricModel& m;
  const QInPart& part;
  Branch br;
  void operator()(double, const OdeState<7>& y, OdeState<7>& dy) const {
    MetricJet j;
    m.jet(Vec3{y[0], y[1], y[2]}, j);
    const BValue b = b_pm_grad(j, Vec3{y[3], y[4], y[5]}, br);
    dy[0] = -b.dxi[0];
    dy[1] = -b.dxi[1];
    dy[2] = -b.dxi[2];
    dy[3] = b.dx[0];
    dy[4] = b.dx[1];
    dy[5] = b.dx[2];
    dy[6] = eval_psi(part, {{y[0], y[1], y[2]}, {y[3], y[4], y[5]}});
  }
};

}  // namespace

double EscapeAssembly::q_in(const PhasePoint& pt, Branch br) const {
  const PhasePoint z = phi_scale(metric_, pt, br);
  const double r = norm(z.x);
  const double cut = plateau(r, 2.0 * q_in_.R, 4.0 * q_in_.R);
  if (cut == 0.0) return 0.0;

  OdeOptions oo;
  oo.rtol = opt_.flow.rtol;
  oo.atol = opt_.flow.atol;
  PsiFlowRhs rhs{metric_, q_in_, br};
  const double esc = std::max(2.0 * q_in_.R, r + q_in_.escape_delta);
  OdeState<7> y0{z.x[0], z.x[1], z.x[2], z.xi[0], z.xi[1], z.xi[2], 0.0};
  auto res = integrate_ode<7>(rhs, y0, 0.0, q_in_.cap, oo,
                              [&](const DenseSegment<7>&, const OdeState<7>& y, double) {
                                return norm(Vec3{y[0], y[1], y[2]}) < esc;
                              });
  return -cut * res.y[6];
}

double EscapeAssembly::q2(const PhasePoint& pt, Branch br) const {
  return params_.epsilon * q_in(pt, br) + q_out(pt, br);
}

double EscapeAssembly::g_pm(const PhasePoint& pt, Branch br) const {
  const double chi = cutoff(pt, br);
  if (chi == 0.0) return 0.0;
  const double s = params_.sigma;
  return (clamped_exp(-s * q1(pt, br)) + clamped_exp(-s * q2(pt, br))) * chi;
}

double EscapeAssembly::q(double tau, const PhasePoint& pt) const {
  MetricJet j;
  metric_.jet(pt.x, j);
  const double bp = b_pm(j, pt.xi, Branch::plus);
  const double bm = b_pm(j, pt.xi, Branch::minus);
  return (tau - bp) * g_pm(pt, Branch::minus) + (tau - bm) * g_pm(pt, Branch::plus);
}

namespace {

// One classical RK4 step of the tau-frozen spatial Hamiltonian field
// (xdot, xidot) = (2 tau g0 + 2 g xi, -2 tau dg0 xi - dg(xi, xi)).
PhasePoint tau_field_step(const MetricModel& m, double tau, const PhasePoint& w, double h) {
  auto field = [&](const PhasePoint& p, Vec3& dx, Vec3& dxi) {
    MetricJet j;
    m.jet(p.x, j);
    const Vec3 gxi = j.g.apply(p.xi);
    for (int k = 0; k < 3; ++k) {
      dx[k] = 2.0 * tau * j.g0[k] + 2.0 * gxi[k];
      dxi[k] = -2.0 * tau * dot(j.dg0.row(k), p.xi) - j.dg[static_cast<size_t>(k)].quad(p.xi, p.xi);
    }
  };
  Vec3 k1x, k1xi, k2x, k2xi, k3x, k3xi, k4x, k4xi;
  field(w, k1x, k1xi);
  field({w.x + 0.5 * h * k1x, w.xi + 0.5 * h * k1xi}, k2x, k2xi);
  field({w.x + 0.5 * h * k2x, w.xi + 0.5 * h * k2xi}, k3x, k3xi);
  field({w.x + h * k3x, w.xi + h * k3xi}, k4x, k4xi);
  const double c = h / 6.0;
  return {w.x + c * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
          w.xi + c * (k1xi + 2.0 * k2xi + 2.0 * k3xi + k4xi)};
}

}  // namespace

double EscapeAssembly::bracket(double tau, const PhasePoint& pt) const {
  // Step size: displacement ~ fd_step * coordinate scale.
  MetricJet j;
  metric_.jet(pt.x, j);
  const Vec3 gxi = j.g.apply(pt.xi);
  double fmag = 0.0;
  for (int k = 0; k < 3; ++k) {
    fmag += std::abs(2.0 * tau * j.g0[k] + 2.0 * gxi[k]);
    fmag +=
        std::abs(-2.0 * tau * dot(j.dg0.row(k), pt.xi) - j.dg[static_cast<size_t>(k)].quad(pt.xi, pt.xi));
  }
  const double scale = 1.0 + norm(pt.x) + norm(pt.xi);
  const double h = opt_.fd_step * scale / (1.0 + fmag);

  const PhasePoint wp = tau_field_step(metric_, tau, pt, h);
  const PhasePoint wm = tau_field_step(metric_, tau, pt, -h);
  const double hq = (q(tau, wp) - q(tau, wm)) / (2.0 * h);
  const double a_op = metric_.damping_gain() * metric_.damping(pt.x);
  return hq + 2.0 * params_.gamma * tau * a_op * q(tau, pt);
}

namespace {

// Per-branch data shared by the single-branch bracket assembly.
struct BranchEval {
  double b = 0.0;
  BValue bv;
  double chi = 0.0;
  double q1 = 0.0, q2 = 0.0;
  double e1 = 0.0, e2 = 0.0;  // exp(-sigma q_j)
  double g = 0.0;             // (e1 + e2) chi
  double hq1 = 0.0, hq2 = 0.0;  // H_{p_br} q_j, central differences along the half flow
};

}  // namespace

// Bracket coefficients via the exact single-branch reduction: at tau = b_pm
// the bracket collapses onto one light cone, and the leading tau^2
// coefficient comes from the tau-derivative of the full field. This keeps
// every finite difference on O(1) symbols.
EscapeAssembly::TauPoly EscapeAssembly::bracket_coeffs(const PhasePoint& pt) const {
  MetricJet j;
  metric_.jet(pt.x, j);

  BranchEval be[2];
  const Branch branches[2] = {Branch::plus, Branch::minus};
  const double scale = 1.0 + norm(pt.x) + norm(pt.xi);

  for (int i = 0; i < 2; ++i) {
    const Branch br = branches[i];
    BranchEval& e = be[i];
    e.bv = b_pm_grad(j, pt.xi, br);
    e.b = e.bv.b;
    e.chi = chi_above(std::abs(e.b), params_.lambda);
    if (e.chi == 0.0) continue;
    e.q1 = q1(pt, br);
    e.q2 = q2(pt, br);
    e.e1 = clamped_exp(-params_.sigma * e.q1);
    e.e2 = clamped_exp(-params_.sigma * e.q2);
    e.g = (e.e1 + e.e2) * e.chi;

    // H_{p_br} q_j by central differences along the branch's own flow; the
    // cutoff is exactly conserved there so it never enters the difference.
    double fmag = norm(e.bv.dxi) + norm(e.bv.dx);
    const double h = opt_.fd_step * scale / (1.0 + fmag);
    OdeState<6> yp = detail::pack_phase(pt), ym = detail::pack_phase(pt);
    {
      // single RK4 step of the half field in both directions
      detail::HalfFieldRhs rhs{metric_, br};
      OdeState<6> k1, k2, k3, k4, tmp;
      auto step = [&](double hh, OdeState<6>& out) {
        const OdeState<6> y0 = detail::pack_phase(pt);
        rhs(0.0, y0, k1);
        for (int c = 0; c < 6; ++c) tmp[static_cast<size_t>(c)] = y0[static_cast<size_t>(c)] + 0.5 * hh * k1[static_cast<size_t>(c)];
        rhs(0.0, tmp, k2);
        for (int c = 0; c < 6; ++c) tmp[static_cast<size_t>(c)] = y0[static_cast<size_t>(c)] + 0.5 * hh * k2[static_cast<size_t>(c)];
        rhs(0.0, tmp, k3);
        for (int c = 0; c < 6; ++c) tmp[static_cast<size_t>(c)] = y0[static_cast<size_t>(c)] + hh * k3[static_cast<size_t>(c)];
        rhs(0.0, tmp, k4);
        for (int c = 0; c < 6; ++c)
          out[static_cast<size_t>(c)] = y0[static_cast<size_t>(c)] +
                    hh / 6.0 * (k1[static_cast<size_t>(c)] + 2 * k2[static_cast<size_t>(c)] +
                                2 * k3[static_cast<size_t>(c)] + k4[static_cast<size_t>(c)]);
      };
      step(h, yp);
      step(-h, ym);
    }
    const PhasePoint pp = detail::unpack_phase(yp);
    const PhasePoint pm = detail::unpack_phase(ym);
    e.hq1 = (q1(pp, br) - q1(pm, br)) / (2.0 * h);
    e.hq2 = (q2(pp, br) - q2(pm, br)) / (2.0 * h);
  }

  const double bp = be[0].b, bm = be[1].b;
  const double bdiff = bp - bm;
  const double a_op = metric_.damping_gain() * metric_.damping(pt.x);

  // cross = sum_k (b+_xi b-_x - b+_x b-_xi)
  double cross = 0.0;
  for (int k = 0; k < 3; ++k)
    cross += be[0].bv.dxi[k] * be[1].bv.dx[k] - be[0].bv.dx[k] * be[1].bv.dxi[k];

  // Bracket at tau = b_pm: all terms carry the branch's own cutoff weight.
  double br_char[2];
  for (int i = 0; i < 2; ++i) {
    const BranchEval& e = be[i];
    if (e.chi == 0.0) {
      br_char[i] = 0.0;
      continue;
    }
    const double sgn = (i == 0) ? 1.0 : -1.0;
    const double hq_sum =
        -params_.sigma * (e.e1 * e.hq1 + e.e2 * e.hq2) * e.chi;  // H_{p_br}(g_br)
    br_char[i] = -(bdiff * bdiff) * hq_sum - bdiff * e.g * cross +
                 2.0 * params_.gamma * e.b * sgn * bdiff * a_op * e.g;
  }

  // Leading coefficient: a0 = 2 gamma a (g+ + g-) + d/ds (g+ + g-) along the
  // tau-derivative field (2 g0, -2 dg0 xi); the latter vanishes without
  // cross terms.
  double a0 = 2.0 * params_.gamma * a_op * (be[0].g + be[1].g);
  if (metric_.has_cross_terms()) {
    Vec3 fx = 2.0 * j.g0;
    Vec3 fxi;
    for (int k = 0; k < 3; ++k) fxi[k] = -2.0 * dot(j.dg0.row(k), pt.xi);
    const double fmag = norm(fx) + norm(fxi);
    if (fmag > 1e-14) {
      const double h = opt_.fd_step * scale / fmag;
      const PhasePoint pp{pt.x + h * fx, pt.xi + h * fxi};
      const PhasePoint pm{pt.x - h * fx, pt.xi - h * fxi};
      const double gp = g_pm(pp, Branch::plus) + g_pm(pp, Branch::minus);
      const double gm = g_pm(pm, Branch::plus) + g_pm(pm, Branch::minus);
      a0 += (gp - gm) / (2.0 * h);
    }
  }

  TauPoly poly;
  poly.a0 = a0;
  poly.a1 = (br_char[0] - br_char[1] - a0 * (bp * bp - bm * bm)) / bdiff;
  poly.a2 = br_char[0] - a0 * bp * bp - poly.a1 * bp;
  return poly;
}

double EscapeAssembly::correction_m(const TauPoly& c, double bp, double bm) const {
  const double d = bp - bm;
  return -(c.a1 * (bp + bm) + 2.0 * (c.a0 * bp * bm + c.a2)) / (d * d);
}

double EscapeAssembly::correction_m(const PhasePoint& pt) const {
  MetricJet j;
  metric_.jet(pt.x, j);
  const double bp = b_pm(j, pt.xi, Branch::plus);
  const double bm = b_pm(j, pt.xi, Branch::minus);
  return correction_m(bracket_coeffs(pt), bp, bm);
}

double EscapeAssembly::total(double tau, const TauPoly& c, double m_val, double bp,
                             double bm) const {
  return (c.a0 - m_val) * tau * tau + (c.a1 + (bp + bm) * m_val) * tau + (c.a2 - bp * bm * m_val);
}

// ---------------------------------------------------------------------------
// Assembly with epsilon selection
// ---------------------------------------------------------------------------

EscapeAssembly assemble_q(const MetricModel& m, const AFEstimate& af, const BScaleBounds& bscale,
                          double R, const std::vector<PhasePoint>& trapped_plus,
                          const std::vector<PhasePoint>& trapped_minus, EscapeParams params,
                          const EscapeOptions& opt) {
  if (R < af.R0) throw std::invalid_argument("assemble_q: R must be >= R0");
  BootstrapWeight f(af, params.sigma);

  EscapeOptions o = opt;
  if (o.a_threshold <= 0.0 && !m.damping_profile().empty())
    o.a_threshold = 1e-6 * m.damping_profile().max_value();

  SemiboundedCover cp = build_q_semibounded(m, Branch::plus, trapped_plus, o);
  SemiboundedCover cm = build_q_semibounded(m, Branch::minus, trapped_minus, o);

  // Radial collar around the trapped set, from the orbit extent of every
  // detected trapped candidate (not just the reduced cover).
  bool excl = false;
  double r_lo = 0.0, r_hi = 0.0;
  if (!trapped_plus.empty() || !trapped_minus.empty()) {
    excl = true;
    r_lo = 1e300;
    r_hi = 0.0;
    OdeOptions oo;
    oo.rtol = o.flow.rtol;
    oo.atol = o.flow.atol;
    const double t_ext = std::min(100.0, o.cover_horizon);
    for (Branch br : {Branch::plus, Branch::minus}) {
      const auto& seeds = (br == Branch::plus) ? trapped_plus : trapped_minus;
      detail::HalfFieldRhs rhs{m, br};
      for (const auto& raw : seeds) {
        const PhasePoint seed = phi_scale(m, raw, br);
        for (double dir : {1.0, -1.0}) {
          integrate_ode<6>(rhs, detail::pack_phase(seed), 0.0, dir * t_ext, oo,
                           [&](const DenseSegment<6>& seg, const OdeState<6>& y, double) {
                             const auto ymid = seg.eval(seg.s0 + 0.5 * seg.h);
                             r_lo = std::min({r_lo, norm(Vec3{y[0], y[1], y[2]}),
                                              norm(Vec3{ymid[0], ymid[1], ymid[2]})});
                             r_hi = std::max({r_hi, norm(Vec3{y[0], y[1], y[2]}),
                                              norm(Vec3{ymid[0], ymid[1], ymid[2]})});
                             return true;
                           });
        }
      }
    }
    // Fold in the detected circular orbits and the inner turning radius of
    // the well (where the radial profile reaches the barrier level): a sparse
    // candidate set may cover only the stable circle while annulus orbits
    // wander over the whole well.
    const auto orbits = circular_orbit_radii(m, 0.05 * R, 1.5 * R, 4096);
    auto profile = [&](double r) {
      return b_pm(m, {{r, 0.0, 0.0}, {0.0, 1.0, 0.0}}, Branch::plus) / r;
    };
    for (const auto& orb : orbits) {
      r_lo = std::min(r_lo, orb.radius);
      r_hi = std::max(r_hi, orb.radius);
      if (orb.stable) continue;
      const double v_barrier = profile(orb.radius);
      // walk inward from the barrier until the profile rises back above it
      double inner = orb.radius;
      for (double r = orb.radius; r > 0.05 * R; r -= 0.01 * orb.radius) {
        if (profile(r) > v_barrier) break;
        inner = r;
      }
      r_lo = std::min(r_lo, inner);
    }
    r_lo = std::max(0.0, r_lo - 0.1);
    r_hi += 0.1;
  }

  QInPart qin = build_q_in_part(m, R, bscale, excl, r_lo, r_hi, o);

  // Epsilon: bisect downward until the interior boundary error is dominated
  // by the exterior multiplier on {2R <= |x| <= 4R}. The two contributions
  // scale separately in epsilon, so probe derivatives are measured once.
  EscapeAssembly probe_asm(m, f, cp, cm, qin, params, o);
  HaltonSampler hs(6, 31);
  struct Probe {
    double h_in, h_out;
  };
  std::vector<Probe> probes;
  probes.reserve(static_cast<size_t>(o.n_probe) * 2);
  for (int k = 0; k < o.n_probe; ++k) {
    const auto idx = static_cast<std::uint64_t>(k);
    const double r = 2.0 * R + 2.0 * R * hs.sample(0, idx);
    const Vec3 x = r * sphere_from_uniform(hs.sample(1, idx), hs.sample(2, idx));
    const Vec3 xi = sphere_from_uniform(hs.sample(3, idx), hs.sample(4, idx));
    const PhasePoint pt{x, xi};
    for (Branch br : {Branch::plus, Branch::minus}) {
      const BValue bv = b_pm_grad(m, pt, br);
      const double h = o.fd_step * (1.0 + norm(x) + 1.0) / (1.0 + norm(bv.dxi) + norm(bv.dx));
      // single RK4 step along the half field
      detail::HalfFieldRhs rhs{m, br};
      auto step = [&](double hh) {
        OdeState<6> k1, k2, k3, k4, tmp;
        const OdeState<6> y0 = detail::pack_phase(pt);
        rhs(0.0, y0, k1);
        for (size_t c = 0; c < 6; ++c) tmp[c] = y0[c] + 0.5 * hh * k1[c];
        rhs(0.0, tmp, k2);
        for (size_t c = 0; c < 6; ++c) tmp[c] = y0[c] + 0.5 * hh * k2[c];
        rhs(0.0, tmp, k3);
        for (size_t c = 0; c < 6; ++c) tmp[c] = y0[c] + hh * k3[c];
        rhs(0.0, tmp, k4);
        OdeState<6> out;
        for (size_t c = 0; c < 6; ++c)
          out[c] = y0[c] + hh / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
        return detail::unpack_phase(out);
      };
      const PhasePoint pp = step(h);
      const PhasePoint pm = step(-h);
      Probe pr;
      pr.h_in = (probe_asm.q_in(pp, br) - probe_asm.q_in(pm, br)) / (2.0 * h);
      pr.h_out = (probe_asm.q_out(pp, br) - probe_asm.q_out(pm, br)) / (2.0 * h);
      probes.push_back(pr);
    }
  }

  // Analytic cap: in the near-flat boundary annulus the exterior bracket is
  // at least f(r) min(sigma c(r), 1)/r (radial/tangential split), while the
  // cutoff boundary term is at most |chi'| sup|grad_xi b| cap. A factor-4
  // margin keeps the sum positive at points the probe set misses.
  double h_out_floor = 1e300;
  for (int k = 0; k <= 64; ++k) {
    const double r = 2.0 * R + 2.0 * R * k / 64.0;
    h_out_floor = std::min(h_out_floor, f.f(r) * std::min(params.sigma * f.c_at(r), 1.0) / r);
  }
  h_out_floor *= 0.5;  // slack for the AF-small perturbation terms
  double c_speed = 1.0;
  for (int k = 0; k < 64; ++k) {
    const Vec3 xi = sphere_from_uniform((k + 0.5) / 64.0, std::fmod(k * 0.618, 1.0));
    for (Branch br : {Branch::plus, Branch::minus}) {
      const BValue bv = b_pm_grad(m, {Vec3{3.0 * R * k / 64.0, 0.0, 0.0}, xi}, br);
      c_speed = std::max(c_speed, norm(bv.dxi));
    }
  }
  const double bnd_scale = 2.1875 / (2.0 * R) * c_speed * qin.cap;
  const double eps_cap = 0.25 * h_out_floor / bnd_scale;

  double eps = std::min(params.epsilon, eps_cap);
  bool ok = false;
  for (int halving = 0; halving <= o.max_eps_halvings; ++halving) {
    ok = true;
    for (const auto& pr : probes) {
      const double total = eps * pr.h_in + pr.h_out;
      const double tol = 1e-9 + 1e-4 * eps * std::abs(pr.h_in);
      if (total < -tol) {
        ok = false;
        break;
      }
    }
    if (ok) break;
    eps *= 0.5;
  }
  if (!ok) {
    std::ostringstream ss;
    ss << "assemble_q: epsilon search exhausted (" << o.max_eps_halvings
       << " halvings from " << params.epsilon
       << "); interior boundary error is not dominated on {2R <= |x| <= 4R}";
    throw std::runtime_error(ss.str());
  }
  params.epsilon = eps;

  EscapeAssembly assembly(m, f, cp, cm, qin, params, o);

  // Cover validation: H_{p_pm} q1 + C_pm a must be positive near the seeds.
  for (const SemiboundedCover* cov : {&cp, &cm}) {
    if (cov->elems.empty()) continue;
    for (const auto& e : cov->elems) {
      const double a_here = m.damping_gain() * m.damping(e.seed.x);
      double hq1 = 0.0;
      if (cov->s_max > 0.0) {
        const BValue bv = b_pm_grad(m, e.seed, cov->branch);
        const double h = o.fd_step * (1.0 + norm(e.seed.x) + norm(e.seed.xi)) /
                         (1.0 + norm(bv.dxi) + norm(bv.dx));
        detail::HalfFieldRhs rhs{m, cov->branch};
        OdeState<6> k1;
        const OdeState<6> y0 = detail::pack_phase(e.seed);
        rhs(0.0, y0, k1);
        OdeState<6> yp = y0, ym = y0;
        for (size_t c = 0; c < 6; ++c) {
          yp[c] += h * k1[c];
          ym[c] -= h * k1[c];
        }
        hq1 = (assembly.q1(detail::unpack_phase(yp), cov->branch) -
               assembly.q1(detail::unpack_phase(ym), cov->branch)) /
              (2.0 * h);
      }
      if (hq1 + cov->C_pm * a_here < 0.9)
        throw std::runtime_error(
            "assemble_q: cover validation failed (H q1 + C a below margin at a seed)");
    }
  }
  return assembly;
}

// ---------------------------------------------------------------------------
// Positivity verification
// ---------------------------------------------------------------------------

PositivityReport verify_escape_inequality(const EscapeAssembly& assembly,
                                          const EscapeSampleSpec& spec, double c_target,
                                          int n_threads) {
  const MetricModel& m = assembly.metric();
  const int n_pts = spec.n_points;
  const int per_pt = spec.n_tau + 2;

  struct PointResult {
    std::array<double, 16> values;  // n_tau + 2 slots used
    std::array<double, 16> taus;
    std::array<bool, 16> is_char;
    int n = 0;
    int activity = 0;  // 0 inactive, 1 mixed, 2 active
    bool corr_ok = true;
    Vec3 x, xi;
  };
  if (per_pt > 16) throw std::invalid_argument("verify_escape_inequality: n_tau too large");

  std::vector<PointResult> results(static_cast<size_t>(n_pts));
  HaltonSampler hs(7, spec.rng_seed);

  parallel_for(static_cast<size_t>(n_pts), n_threads, [&](size_t i) {
    const auto idx = static_cast<std::uint64_t>(i);
    PointResult& pr = results[i];
    pr.x = ball_from_uniform(hs.sample(0, idx), hs.sample(1, idx), hs.sample(2, idx),
                             spec.x_radius);
    const double mag = spec.xi_lo + hs.sample(5, idx) * (spec.xi_hi - spec.xi_lo);
    pr.xi = mag * sphere_from_uniform(hs.sample(3, idx), hs.sample(4, idx));
    const PhasePoint pt{pr.x, pr.xi};

    MetricJet j;
    m.jet(pt.x, j);
    const double bp = b_pm(j, pt.xi, Branch::plus);
    const double bm = b_pm(j, pt.xi, Branch::minus);
    const double chip = chi_above(std::abs(bp), assembly.params().lambda);
    const double chim = chi_above(std::abs(bm), assembly.params().lambda);

    // Activity classification with a small margin so finite-difference
    // probes cannot straddle the cutoff boundary.
    const double lam = assembly.params().lambda;
    const bool off_p = std::abs(bp) < lam * 0.999;
    const bool off_m = std::abs(bm) < lam * 0.999;
    const bool full_p = chip >= 1.0;
    const bool full_m = chim >= 1.0;
    if (off_p && off_m)
      pr.activity = 0;
    else if (full_p && full_m)
      pr.activity = 2;
    else
      pr.activity = 1;

    const auto coeffs = assembly.bracket_coeffs(pt);
    const double mval = assembly.correction_m(coeffs, bp, bm);
    const double br2 = jbracket(pt.x) * jbracket(pt.x);
    const double xi2 = norm2(pt.xi);

    auto push = [&](double tau, bool is_char) {
      const double v =
          assembly.total(tau, coeffs, mval, bp, bm) * br2 / (tau * tau + xi2);
      pr.values[static_cast<size_t>(pr.n)] = v;
      pr.taus[static_cast<size_t>(pr.n)] = tau;
      pr.is_char[static_cast<size_t>(pr.n)] = is_char;
      ++pr.n;
    };
    for (int k = 0; k < spec.n_tau; ++k) {
      const double u = hs.sample(6, idx * static_cast<std::uint64_t>(spec.n_tau) +
                                        static_cast<std::uint64_t>(k));
      push(spec.tau_bound * (2.0 * u - 1.0), false);
    }
    push(bp, true);
    push(bm, true);

    // Correction validity: concavity and discriminant where the symbols are
    // active; exact vanishing where the cutoffs are off.
    if (pr.activity == 0) {
      pr.corr_ok = (mval == 0.0 && coeffs.a0 == 0.0 && coeffs.a1 == 0.0 && coeffs.a2 == 0.0);
    } else if (pr.activity == 2) {
      const double disc = (coeffs.a1 + (bp + bm) * mval) * (coeffs.a1 + (bp + bm) * mval) -
                          4.0 * (coeffs.a0 - mval) * (coeffs.a2 - bp * bm * mval);
      pr.corr_ok = (coeffs.a0 - mval > 0.0) && (disc < 0.0);
    } else {
      pr.corr_ok = true;  // partial cutoff band: the quadratic degenerates smoothly
    }
  });

  PositivityReport rep;
  rep.params = assembly.params();
  std::vector<double> all;
  all.reserve(static_cast<size_t>(n_pts) * static_cast<size_t>(per_pt));
  double char_min = 1e300, global_min = 1e300;
  std::vector<WorstSample> worst;

  for (const auto& pr : results) {
    switch (pr.activity) {
      case 0: ++rep.n_points_inactive; break;
      case 1: ++rep.n_points_mixed; break;
      default: ++rep.n_points_active;
    }
    if (!pr.corr_ok) ++rep.n_correction_failures;
    for (int k = 0; k < pr.n; ++k) {
      const double v = pr.values[static_cast<size_t>(k)];
      all.push_back(v);
      global_min = std::min(global_min, v);
      if (pr.is_char[static_cast<size_t>(k)]) {
        ++rep.n_char;
        char_min = std::min(char_min, v);
      }
      WorstSample w;
      w.value = v;
      w.tau = pr.taus[static_cast<size_t>(k)];
      w.x = pr.x;
      w.xi = pr.xi;
      w.char_set = pr.is_char[static_cast<size_t>(k)];
      worst.push_back(w);
      std::push_heap(worst.begin(), worst.end(),
                     [](const WorstSample& a, const WorstSample& b) { return a.value < b.value; });
      if (worst.size() > 10) {
        std::pop_heap(worst.begin(), worst.end(),
                      [](const WorstSample& a, const WorstSample& b) { return a.value < b.value; });
        worst.pop_back();
      }
    }
  }

  rep.n_samples = static_cast<int>(all.size());
  std::vector<double> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  const size_t k01 = static_cast<size_t>(0.01 * static_cast<double>(sorted.size()));
  const double p01 = sorted[std::min(k01, sorted.size() - 1)];
  rep.char_min = char_min;
  rep.min_value = global_min;
  rep.c0 = std::min(char_min, p01);
  int below_c0 = 0, below_target = 0;
  for (double v : all) {
    if (v < rep.c0) ++below_c0;
    if (v < c_target) ++below_target;
  }
  rep.frac_below_c0 = static_cast<double>(below_c0) / static_cast<double>(all.size());
  rep.frac_below_target = static_cast<double>(below_target) / static_cast<double>(all.size());
  rep.correction_valid_all = (rep.n_correction_failures == 0);
  std::sort_heap(worst.begin(), worst.end(),
                 [](const WorstSample& a, const WorstSample& b) { return a.value < b.value; });
  rep.worst = std::move(worst);
  rep.pass = std::isfinite(rep.c0) && rep.c0 > c_target && rep.correction_valid_all;
  return rep;
}

// ---------------------------------------------------------------------------
// Parameter tuning
// ---------------------------------------------------------------------------

TuneResult tune_escape(const MetricModel& m, const AFEstimate& af, const BScaleBounds& bscale,
                       double R, const std::vector<PhasePoint>& trapped_plus,
                       const std::vector<PhasePoint>& trapped_minus, const TuneGrids& grids,
                       double c_target, std::uint64_t rng_seed, const EscapeOptions& opt,
                       int n_threads) {
  TuneResult out;
  double best_c0 = -1e300;

  for (double lambda : grids.lambda) {
    for (double sigma : grids.sigma) {
      for (double gamma : grids.gamma) {
        EscapeParams params{lambda, sigma, gamma, grids.epsilon_start};
        TuneEntry entry;
        entry.params = params;
        try {
          EscapeAssembly assembly =
              assemble_q(m, af, bscale, R, trapped_plus, trapped_minus, params, opt);
          EscapeSampleSpec spec;
          spec.x_radius = 8.0 * R;
          spec.xi_lo = lambda;
          spec.xi_hi = 8.0 * lambda;
          spec.tau_bound = bscale.C_b * 8.0 * lambda;
          spec.n_points = grids.tune_points;
          spec.n_tau = grids.n_tau;
          spec.rng_seed = rng_seed;
          PositivityReport scan = verify_escape_inequality(assembly, spec, c_target, n_threads);
          entry.params = assembly.params();  // epsilon after bisection
          entry.c0 = scan.c0;
          entry.passed = scan.pass;
          out.history.push_back(entry);
          if (scan.c0 > best_c0 && !out.found) {
            best_c0 = scan.c0;
            out.report = scan;
            out.params = assembly.params();
          }
          if (scan.pass) {
            spec.n_points = grids.final_points;
            PositivityReport full = verify_escape_inequality(assembly, spec, c_target, n_threads);
            if (full.pass) {
              out.found = true;
              out.params = assembly.params();
              out.report = full;
              out.assembly = std::move(assembly);
              return out;
            }
            out.report = full;
          }
        } catch (const std::exception&) {
          entry.passed = false;
          entry.c0 = -1e300;
          out.history.push_back(entry);
        }
      }
    }
  }
  return out;
}

}  // namespace gcwave
