#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "gcwave/escape.hpp"
#include "gcwave/flow.hpp"

using namespace gcwave;

namespace {

constexpr double kA = 4.0, kRc = 8.0, kW = 1.6;

MetricModel shell_metric() { return MetricModel::trapped_shell(kA, kRc, kW); }

MetricModel covered_shell() {
  return shell_metric().with_damping(DampingProfile({{{0, 0, 0}, 14.0, 1.0}}));
}

AFEstimate hand_af(std::vector<double> c_seq, double R0 = 1.0) {
  AFEstimate af;
  af.R0 = R0;
  af.j0 = static_cast<int>(std::log2(R0));
  af.measured = c_seq;
  af.c_seq = std::move(c_seq);
  af.c_total = 0.0;
  for (size_t j = static_cast<size_t>(af.j0); j < af.c_seq.size(); ++j)
    af.c_total += af.c_seq[j];
  return af;
}

std::vector<PhasePoint> trapped_candidates(const MetricModel& m, double R, int want) {
  ClassifyParams p;
  p.R = R;
  p.delta = 0.1 * R;
  p.t_max = 500.0;
  std::vector<PhasePoint> out;
  for (Branch br : {Branch::plus, Branch::minus}) {
    auto seeds = gcc_seed_set(m, br, R, 0, 48, 101);
    for (const auto& s : seeds) {
      if (static_cast<int>(out.size()) >= want) break;
      if (classify_ray(m, br, s, p).verdict == RayVerdict::trapped) out.push_back(s);
    }
    break;  // plus branch seeds are enough here
  }
  return out;
}

EscapeAssembly default_assembly(const MetricModel& m, const AFEstimate& af,
                                const BScaleBounds& bs, double R,
                                const std::vector<PhasePoint>& tp,
                                const std::vector<PhasePoint>& tm,
                                EscapeParams params = {4.0, 4.0, 64.0, 1.0}) {
  EscapeOptions opt;
  opt.a_threshold = m.damping_profile().empty() ? 1e-12 : 1e-6;
  return assemble_q(m, af, bs, R, tp, tm, params, opt);
}

}  // namespace

TEST_CASE("bootstrap weight: zero sequence substitutes a floor and stays at 1") {
  BootstrapWeight f(hand_af({0, 0, 0, 0, 0, 0}), 4.0);
  CHECK(f.zero_substituted());
  for (double r : {1.5, 4.0, 64.0, 1000.0}) CHECK(std::abs(f.f(r) - 1.0) <= 1e-8);
}

TEST_CASE("bootstrap weight: constant sequence matches the closed form") {
  const double c0 = 0.01, sigma = 4.0;
  BootstrapWeight f(hand_af(std::vector<double>(12, c0)), sigma);
  // flat interpolant c(s) = 1.5 c0, so f(r) = r^{1.5 sigma c0}
  for (double r : {2.83, 8.0, 45.25, 512.0}) {
    const double expect = std::pow(r, 1.5 * sigma * c0);
    CHECK(f.f(r) == doctest::Approx(expect).epsilon(1e-7));
  }
}

TEST_CASE("bootstrap weight invariants on a measured sequence") {
  auto m = covered_shell();
  const auto af = estimate_af(m, 8, 512);
  const double sigma = 16.0;
  BootstrapWeight f(af, sigma);
  // c(s) within (c_j, 2 c_j) on each dyadic segment
  for (size_t j = 0; j < af.c_seq.size(); ++j) {
    for (int k = 1; k < 8; ++k) {
      const double s = std::pow(2.0, static_cast<double>(j) + k / 8.0);
      CHECK(f.c_at(s) > af.c_seq[j] * (1.0 - 1e-9));
      CHECK(f.c_at(s) < 2.0 * af.c_seq[j] * (1.0 + 1e-9));
    }
  }
  // monotone, bounded, and f' r / (c_j f) = sigma within a factor of two
  double prev = f.f(af.R0);
  double top = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double r = af.R0 + i * (256.0 - af.R0) / 1000.0;
    const double v = f.f(r);
    CHECK(v >= prev * (1.0 - 1e-12));
    prev = v;
    top = v;
    const int j = static_cast<int>(std::floor(std::log2(r)));
    const double ratio = f.f_deriv(r) * r / (af.c_seq[static_cast<size_t>(j)] * v);
    CHECK(ratio >= 0.5 * sigma);
    CHECK(ratio <= 2.0 * sigma);
  }
  // f(infty)/f(R0) <= exp(sigma * sum c_j * ln2 * (1 + slack))
  CHECK(top / f.f(af.R0) <=
        std::exp(sigma * af.c_total * std::log(2.0) * 1.5));
}

TEST_CASE("semi-bounded cover with genuine backward-flow transport") {
  // damping on the far side of the circular orbit forces a real hit time
  auto m = shell_metric().with_damping(DampingProfile({{{-5.267191, 0, 0}, 3.0, 1.0}}));
  const PhasePoint seed{{5.267191, 0, 0}, {0, 1, 0}};
  EscapeOptions opt;
  opt.a_threshold = 1e-6;
  const auto cover = build_q_semibounded(m, Branch::plus, {seed}, opt);
  REQUIRE(cover.elems.size() == 1);
  const auto& e = cover.elems[0];
  // half-orbit transport to the ball on the antipode; window from geometry
  CHECK(e.s_hit >= 10.0);
  CHECK(e.s_hit <= 16.0);
  CHECK(e.alpha > 0.05);
  CHECK(e.weight_C == doctest::Approx(2.0 / e.alpha));
  CHECK(cover.C_pm == doctest::Approx(e.weight_C));
  CHECK(cover.s_max == doctest::Approx(e.s_hit));

  // quadrature oracle: fine composite-Simpson of the pulled-back cutoff along
  // a separately integrated backward orbit
  const auto af = hand_af({0.1, 0.1, 0.05, 1e-5, 1e-5, 1e-5, 1e-5}, 8.0);
  BootstrapWeight f(af, 4.0);
  QInPart qin;
  qin.R = 16.0;
  qin.xi_lo = 0.4;
  qin.xi_hi = 1.2;
  qin.delta_w = 0.04;
  qin.transit_bound = 80.0;
  qin.cap = 140.0;
  qin.escape_delta = 1.6;
  EscapeAssembly asmb(m, f, cover, SemiboundedCover{Branch::minus, {}, 0, 0}, qin,
                      {4.0, 4.0, 64.0, 1e-6}, opt);

  const PhasePoint z = phi_scale(m, seed, Branch::plus);
  FlowOptions fo;
  fo.rtol = 1e-12;
  fo.atol = 1e-13;
  fo.sample_stride = 1;
  const auto orbit = integrate_half(m, Branch::plus, z, 0.0, -e.s_hit, fo);
  REQUIRE(orbit.valid);
  // Simpson over a dense resampling of the stored orbit
  const int N = 20000;
  auto chi_at = [&](double s) {
    // locate bracketing samples and interpolate linearly (dense enough)
    const auto& ss = orbit.s;
    size_t lo = 0, hi = ss.size() - 1;
    while (hi - lo > 1) {
      const size_t mid = (lo + hi) / 2;
      if (std::abs(ss[mid]) <= s)
        lo = mid;
      else
        hi = mid;
    }
    const double t = (s - std::abs(ss[lo])) / (std::abs(ss[hi]) - std::abs(ss[lo]));
    const PhasePoint a = orbit.half_states[lo], b = orbit.half_states[hi];
    const PhasePoint w{a.x + t * (b.x - a.x), a.xi + t * (b.xi - a.xi)};
    const double d = std::sqrt(norm2(w.x - e.seed.x) + norm2(w.xi - e.seed.xi));
    return plateau(d, e.chi_inner, e.chi_outer);
  };
  double oracle = 0.0;
  const double hstep = e.s_hit / N;
  for (int i = 0; i < N; i += 2)
    oracle += hstep / 3.0 * (chi_at(i * hstep) + 4.0 * chi_at((i + 1) * hstep) +
                             chi_at((i + 2) * hstep));
  const double lib = asmb.q1(seed, Branch::plus);
  CHECK(lib == doctest::Approx(oracle).epsilon(2e-4));
  CHECK(lib > 0.0);
  CHECK(lib <= e.s_hit);

  // telescoping bracket: H_{p+} q_w = chi_w - chi_w o phi_{-s_w}
  {
    const BValue bv = b_pm_grad(m, z, Branch::plus);
    const double h = 1e-5 * (1.0 + norm(z.x) + norm(z.xi)) / (1.0 + norm(bv.dxi) + norm(bv.dx));
    const PhasePoint zp{z.x - h * bv.dxi, z.xi + h * bv.dx};
    const PhasePoint zm{z.x + h * bv.dxi, z.xi - h * bv.dx};
    const double fd = (asmb.q1(zp, Branch::plus) - asmb.q1(zm, Branch::plus)) / (2.0 * h);
    const double chi_here = plateau(0.0, e.chi_inner, e.chi_outer);  // = 1 at the seed
    const double chi_back = chi_at(e.s_hit);
    CHECK(std::abs(fd - (chi_here - chi_back)) <= 1e-4);
  }
}

TEST_CASE("cover construction fails loudly when a seed never meets damping") {
  auto m = shell_metric().with_damping(DampingProfile({{{40.0, 0, 0}, 3.0, 1.0}}));
  const PhasePoint seed{{5.267191, 0, 0}, {0, 1, 0}};
  EscapeOptions opt;
  opt.a_threshold = 1e-6;
  opt.cover_horizon = 100.0;
  bool threw = false;
  try {
    build_q_semibounded(m, Branch::plus, {seed}, opt);
  } catch (const std::runtime_error& err) {
    threw = true;
    CHECK(std::string(err.what()).find("geometric control violated") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("interior symbol: transit bound and bracket identity") {
  auto m = MetricModel::minkowski().with_damping(DampingProfile({{{0, 0, 0}, 2.0, 1.0}}));
  const double R = 4.0;
  const auto bs = estimate_b_scale(m, 2.0 * R);
  EscapeOptions opt;
  const QInPart part = build_q_in_part(m, R, bs, false, 0, 0, opt);
  // straight rays cross the support ball (radius 1.5R) in bounded time;
  // forward+backward passes, padded 2x
  CHECK(part.transit_bound > 0.0);
  CHECK(part.transit_bound <= 6.0 * R + 2.0);

  const auto af = estimate_af(m, 6, 256);
  BootstrapWeight f(af, 4.0);
  EscapeAssembly asmb(m, f, SemiboundedCover{Branch::plus, {}, 0, 0},
                      SemiboundedCover{Branch::minus, {}, 0, 0}, part, {4.0, 4.0, 64.0, 0.5},
                      opt);

  // support: q_in vanishes beyond 4R
  CHECK(asmb.q_in({{4.0 * R + 1.0, 3.0, 0}, {0.3, 1.0, 0}}, Branch::plus) == 0.0);

  // H_{p+} q_in = psi o Phi at points where chi_{<2R} == 1
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 12; ++i) {
    const PhasePoint pt{{R * u(rng), R * u(rng), R * u(rng)},
                        {u(rng) + 1.4, u(rng), u(rng)}};
    const BValue bv = b_pm_grad(m, pt, Branch::plus);
    const double h = 1e-5 * (1.0 + norm(pt.x) + norm(pt.xi)) / (1.0 + norm(bv.dxi) + norm(bv.dx));
    const PhasePoint pp{pt.x - h * bv.dxi, pt.xi + h * bv.dx};
    const PhasePoint pm{pt.x + h * bv.dxi, pt.xi - h * bv.dx};
    const double fd = (asmb.q_in(pp, Branch::plus) - asmb.q_in(pm, Branch::plus)) / (2.0 * h);
    // psi at the Phi-normalized point: reconstruct via the library pieces
    const PhasePoint z = phi_scale(m, pt, Branch::plus);
    const double r = norm(z.x);
    double psi = plateau(r, part.R, 1.5 * part.R);
    const double y = norm(z.xi);
    psi *= smoothstep3((y - (part.xi_lo - part.delta_w)) / (0.5 * part.delta_w));
    psi *= smoothstep3(((part.xi_hi + 1.0) - y) / 0.5);
    worst = std::max(worst, std::abs(fd - psi));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("exterior multiplier formula and support") {
  auto m = MetricModel::minkowski();
  const auto af = estimate_af(m, 6, 256);
  BootstrapWeight f(af, 4.0);
  QInPart part;
  part.R = 4.0;
  part.xi_lo = 0.9;
  part.xi_hi = 1.1;
  part.delta_w = 0.09;
  part.transit_bound = 20.0;
  part.cap = 36.0;
  part.escape_delta = 0.4;
  EscapeOptions opt;
  EscapeAssembly asmb(m, f, SemiboundedCover{Branch::plus, {}, 0, 0},
                      SemiboundedCover{Branch::minus, {}, 0, 0}, part, {2.0, 4.0, 16.0, 0.1},
                      opt);
  // inside R the multiplier vanishes
  CHECK(asmb.q_out({{2.0, 1.0, 0}, {1, 1, 0}}, Branch::plus) == 0.0);
  // flat-space closed form: -chi f (xi . x) / (|xi| |x|)
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Vec3 x{u(rng), u(rng), u(rng)};
    x = (9.0 + 4.0 * u(rng)) * (x / std::max(norm(x), 1e-9));
    const Vec3 xi{u(rng) + 1.2, u(rng), u(rng)};
    const double r = norm(x);
    const double chi = 1.0 - plateau(r, part.R, 2.0 * part.R);
    const double expect = -chi * f.f(r) * dot(xi, x) / (norm(xi) * r);
    CHECK(asmb.q_out({x, xi}, Branch::plus) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("exterior bracket stays nonnegative and carries the dyadic floor") {
  auto m = covered_shell();
  const auto af = estimate_af(m, 8, 512);
  const auto bs = estimate_b_scale(m, 32.0);
  auto tp = trapped_candidates(m, af.R0, 12);
  const auto asmb = default_assembly(m, af, bs, af.R0, tp, tp);
  const double R = af.R0;
  const BootstrapWeight& f = asmb.bootstrap();

  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double floor_ratio = 1e300;
  for (int i = 0; i < 64; ++i) {
    Vec3 x{u(rng), u(rng), u(rng)};
    const double r = 2.2 * R + 5.0 * R * (0.5 + 0.5 * u(rng));
    x = r * (x / std::max(norm(x), 1e-12));
    Vec3 xi{u(rng), u(rng), u(rng)};
    if (norm(xi) < 0.1) xi = Vec3{1, 0, 0};
    const PhasePoint pt{x, xi / norm(xi)};
    const BValue bv = b_pm_grad(m, pt, Branch::plus);
    const double h = 1e-5 * (1.0 + norm(x) + 1.0) / (1.0 + norm(bv.dxi) + norm(bv.dx));
    const PhasePoint pp{pt.x - h * bv.dxi, pt.xi + h * bv.dx};
    const PhasePoint pm{pt.x + h * bv.dxi, pt.xi - h * bv.dx};
    const double fd = (asmb.q_out(pp, Branch::plus) - asmb.q_out(pm, Branch::plus)) / (2.0 * h);
    CHECK(fd >= -1e-10);
    const int j = static_cast<int>(std::floor(std::log2(jbracket(x))));
    floor_ratio =
        std::min(floor_ratio, fd / (af.c_seq[static_cast<size_t>(j)] * std::pow(2.0, -j)));
    (void)f;
  }
  // the sampled minimum defines the empirical constant of the bound; it must
  // be a genuine positive floor
  CHECK(floor_ratio > 0.0);
}

TEST_CASE("scaling-composition identity for Phi-composed symbols") {
  auto m = covered_shell();
  const auto af = estimate_af(m, 8, 512);
  const auto bs = estimate_b_scale(m, 32.0);
  auto tp = trapped_candidates(m, af.R0, 12);
  REQUIRE(!tp.empty());
  const auto asmb = default_assembly(m, af, bs, af.R0, tp, tp);

  // H_{p+}(q_in)(x, xi) computed at (x, xi) and at Phi(x, xi) agree, because
  // the composed symbol only sees the Phi-normalized point.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const PhasePoint pt{{10.0 * u(rng), 10.0 * u(rng), 10.0 * u(rng)},
                        {3.0 * (u(rng) + 1.3), 3.0 * u(rng), 3.0 * u(rng)}};
    const PhasePoint z = phi_scale(m, pt, Branch::plus);
    auto fd_at = [&](const PhasePoint& w) {
      const BValue bv = b_pm_grad(m, w, Branch::plus);
      const double h = 1e-5 * (1.0 + norm(w.x) + norm(w.xi)) / (1.0 + norm(bv.dxi) + norm(bv.dx));
      const PhasePoint wp{w.x - h * bv.dxi, w.xi + h * bv.dx};
      const PhasePoint wm{w.x + h * bv.dxi, w.xi - h * bv.dx};
      return (asmb.q_in(wp, Branch::plus) - asmb.q_in(wm, Branch::plus)) / (2.0 * h);
    };
    const double a = fd_at(pt);
    const double b = fd_at(z);
    worst = std::max(worst, std::abs(a - b) / (1.0 + std::abs(b)));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("assembled symbol: cutoff support is exact") {
  auto m = covered_shell();
  const auto af = estimate_af(m, 8, 512);
  const auto bs = estimate_b_scale(m, 32.0);
  auto tp = trapped_candidates(m, af.R0, 12);
  const auto asmb = default_assembly(m, af, bs, af.R0, tp, tp);
  const double lam = asmb.params().lambda;

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  for (int i = 0; i < 4000 && checked < 200; ++i) {
    const PhasePoint pt{{20 * u(rng), 20 * u(rng), 20 * u(rng)},
                        {0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng)}};
    if (norm2(pt.xi) < 1e-4) continue;
    const double bp = std::abs(b_pm(m, pt, Branch::plus));
    const double bm = std::abs(b_pm(m, pt, Branch::minus));
    if (bp >= 0.999 * lam || bm >= 0.999 * lam) continue;
    ++checked;
    CHECK(asmb.q(3.0, pt) == 0.0);
    CHECK(asmb.q(-17.0, pt) == 0.0);
    const auto coeffs = asmb.bracket_coeffs(pt);
    CHECK(coeffs.a0 == 0.0);
    CHECK(coeffs.a1 == 0.0);
    CHECK(coeffs.a2 == 0.0);
    CHECK(asmb.correction_m(coeffs, b_pm(m, pt, Branch::plus), b_pm(m, pt, Branch::minus)) == 0.0);
  }
  CHECK(checked == 200);
}

TEST_CASE("correction symbol hand value") {
  auto m = MetricModel::minkowski();
  const auto af = estimate_af(m, 6, 256);
  BootstrapWeight f(af, 4.0);
  QInPart part;
  part.R = 4.0;
  part.xi_lo = 0.9;
  part.xi_hi = 1.1;
  part.delta_w = 0.09;
  part.transit_bound = 20.0;
  part.cap = 36.0;
  part.escape_delta = 0.4;
  EscapeOptions opt;
  EscapeAssembly asmb(m, f, SemiboundedCover{Branch::plus, {}, 0, 0},
                      SemiboundedCover{Branch::minus, {}, 0, 0}, part, {2.0, 4.0, 16.0, 0.1},
                      opt);
  // a0 = 1, a1 = 0, a2 = -|xi|^2 with b_pm = +-|xi| gives m = 1
  for (double xi : {1.0, 3.0, 7.5}) {
    const EscapeAssembly::TauPoly poly{1.0, 0.0, -xi * xi};
    CHECK(asmb.correction_m(poly, xi, -xi) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("single-branch bracket assembly matches the full-field differences") {
  auto m = covered_shell();
  const auto af = estimate_af(m, 8, 512);
  const auto bs = estimate_b_scale(m, 32.0);
  auto tp = trapped_candidates(m, af.R0, 12);
  const auto asmb = default_assembly(m, af, bs, af.R0, tp, tp);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  int used = 0;
  for (int i = 0; i < 40 && used < 16; ++i) {
    const PhasePoint pt{{30.0 * u(rng), 30.0 * u(rng), 30.0 * u(rng)},
                        {9.0 * (u(rng) + 1.5), 9.0 * u(rng), 9.0 * u(rng)}};
    if (std::abs(b_pm(m, pt, Branch::plus)) < 2.2 * asmb.params().lambda) continue;
    ++used;
    const auto coeffs = asmb.bracket_coeffs(pt);
    for (double tau : {b_pm(m, pt, Branch::plus), b_pm(m, pt, Branch::minus), 11.0}) {
      const double via_poly = coeffs.a0 * tau * tau + coeffs.a1 * tau + coeffs.a2;
      const double via_fd = asmb.bracket(tau, pt);
      worst = std::max(worst, std::abs(via_poly - via_fd) /
                                  std::max({std::abs(via_poly), std::abs(via_fd), 1e-9}));
    }
  }
  CHECK(used == 16);
  CHECK(worst <= 1e-4);
}

TEST_CASE("exact degree-1 scaling of q when the cutoffs are saturated") {
  auto m = covered_shell();
  const auto af = estimate_af(m, 8, 512);
  const auto bs = estimate_b_scale(m, 32.0);
  auto tp = trapped_candidates(m, af.R0, 12);
  const auto asmb = default_assembly(m, af, bs, af.R0, tp, tp);
  const double lam = asmb.params().lambda;

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int used = 0;
  for (int i = 0; i < 200 && used < 24; ++i) {
    const PhasePoint pt{{25.0 * u(rng), 25.0 * u(rng), 25.0 * u(rng)},
                        {4.0 * (u(rng) + 1.4), 4.0 * u(rng), 4.0 * u(rng)}};
    if (std::abs(b_pm(m, pt, Branch::plus)) < 2.05 * lam) continue;
    if (std::abs(b_pm(m, pt, Branch::minus)) < 2.05 * lam) continue;
    ++used;
    const double tau = 1.7 * norm(pt.xi);
    const double q1v = asmb.q(tau, pt);
    const double q2v = asmb.q(2.0 * tau, {pt.x, 2.0 * pt.xi});
    CHECK(q2v == doctest::Approx(2.0 * q1v).epsilon(1e-10));
  }
  CHECK(used == 24);
}

TEST_CASE("corrected bracket: minimal value matches the closed-form ratio") {
  auto m = covered_shell();
  const auto af = estimate_af(m, 8, 512);
  const auto bs = estimate_b_scale(m, 32.0);
  auto tp = trapped_candidates(m, af.R0, 12);
  const auto asmb = default_assembly(m, af, bs, af.R0, tp, tp);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int used = 0;
  for (int i = 0; i < 200 && used < 20; ++i) {
    const PhasePoint pt{{12.0 * u(rng), 12.0 * u(rng), 12.0 * u(rng)},
                        {9.0 * (u(rng) + 1.4), 9.0 * u(rng), 9.0 * u(rng)}};
    const double bp = b_pm(m, pt, Branch::plus);
    const double bm = b_pm(m, pt, Branch::minus);
    if (std::abs(bp) < 2.2 * asmb.params().lambda) continue;
    if (std::abs(bm) < 2.2 * asmb.params().lambda) continue;
    const auto coeffs = asmb.bracket_coeffs(pt);
    const double br_p = coeffs.a0 * bp * bp + coeffs.a1 * bp + coeffs.a2;
    const double br_m = coeffs.a0 * bm * bm + coeffs.a1 * bm + coeffs.a2;
    if (br_p <= 0.0 || br_m <= 0.0) continue;  // ratio formula needs char positivity
    ++used;
    const double mval = asmb.correction_m(coeffs, bp, bm);
    REQUIRE(coeffs.a0 - mval > 0.0);
    const double tau_star = -(coeffs.a1 + (bp + bm) * mval) / (2.0 * (coeffs.a0 - mval));
    const double min_total = asmb.total(tau_star, coeffs, mval, bp, bm);
    const double closed = br_p * br_m / (br_p + br_m);
    CHECK(min_total == doctest::Approx(closed).epsilon(1e-6));
  }
  CHECK(used == 20);
}

TEST_CASE("positivity verification: non-trapping case passes via q2 alone") {
  auto m = MetricModel::minkowski();
  const auto af = estimate_af(m, 8, 256);
  const auto bs = estimate_b_scale(m, 16.0);
  const auto asmb = default_assembly(m, af, bs, 2.0, {}, {}, {4.0, 4.0, 16.0, 1.0});
  CHECK(asmb.cover(Branch::plus).elems.empty());

  EscapeSampleSpec spec;
  spec.x_radius = 16.0;
  spec.xi_lo = 4.0;
  spec.xi_hi = 32.0;
  spec.tau_bound = bs.C_b * 32.0;
  spec.n_points = 1500;
  spec.n_tau = 6;
  spec.rng_seed = 1;
  const auto rep = verify_escape_inequality(asmb, spec, 0.0, 2);
  CHECK(rep.pass);
  CHECK(rep.c0 > 0.0);
  CHECK(rep.n_correction_failures == 0);
  CHECK(rep.n_samples == 1500 * 8);
}

TEST_CASE("positivity verification is deterministic across thread counts") {
  auto m = covered_shell();
  const auto af = estimate_af(m, 8, 512);
  const auto bs = estimate_b_scale(m, 32.0);
  auto tp = trapped_candidates(m, af.R0, 12);
  const auto asmb = default_assembly(m, af, bs, af.R0, tp, tp, {4.0, 4.0, 16.0, 1.0});
  EscapeSampleSpec spec;
  spec.x_radius = 8.0 * af.R0;
  spec.xi_lo = 4.0;
  spec.xi_hi = 32.0;
  spec.tau_bound = bs.C_b * 32.0;
  spec.n_points = 600;
  spec.n_tau = 6;
  spec.rng_seed = 9;
  const auto r1 = verify_escape_inequality(asmb, spec, 0.0, 1);
  const auto r2 = verify_escape_inequality(asmb, spec, 0.0, 4);
  CHECK(r1.c0 == r2.c0);
  CHECK(r1.min_value == r2.min_value);
  CHECK(r1.char_min == r2.char_min);
  REQUIRE(r1.worst.size() == r2.worst.size());
  for (size_t i = 0; i < r1.worst.size(); ++i) CHECK(r1.worst[i].value == r2.worst[i].value);
}
