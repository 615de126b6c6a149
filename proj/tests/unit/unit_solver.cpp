#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "gcwave/solver.hpp"

using namespace gcwave;

namespace {

// Anisotropic constant-coefficient geometry with off-diagonal entries; drives
// the mixed-term flux path of the stencil.
class AnisotropicGeometry final : public MetricGeometry {
 public:
  void jet(const Vec3&, MetricJet& out) const override {
    out.g0 = Vec3{};
    out.dg0 = Mat3{};
    out.dg = {Sym3{}, Sym3{}, Sym3{}};
    out.g = Sym3::identity();
    out.g.set(0, 1, 0.25);
    out.g.set(1, 2, -0.15);
  }
  double c_ell() const override { return 0.6; }
  double C_ell() const override { return 1.4; }
  bool has_cross_terms() const override { return false; }
  std::string name() const override { return "anisotropic_const"; }
};

GridSpec small_grid(int n, double L, double snapshot_dt) {
  GridSpec g;
  g.n = n;
  g.extent = L;
  g.sponge_width = std::max(3.0, 4.5 * g.h());
  g.snapshot_dt = snapshot_dt;
  return g;
}

}  // namespace

TEST_CASE("plane pulse follows the d'Alembert profile") {
  auto m = MetricModel::minkowski();
  // window == 1 on the domain of dependence of the checked points
  auto window = [](const Vec3& x) { return smoothstep3((6.5 - norm(x)) / 1.5); };
  auto prof = [](double s) { return std::abs(s) < 1.0 ? smoothstep3(1.0 - std::abs(s)) : 0.0; };
  auto dprof = [](double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    return -smoothstep3_deriv(1.0 - std::abs(s)) * (s < 0 ? -1.0 : 1.0);
  };
  WaveData data;
  data.u0 = [&](const Vec3& x) { return prof(x[0]) * window(x); };
  data.v0 = [&](const Vec3& x) { return -dprof(x[0]) * window(x); };

  double errs[2];
  int idx = 0;
  for (int n : {48, 96}) {
    GridSpec g = small_grid(n, 8.0, 0.25);
    EvolveOptions opt;
    opt.t_checkpoints = {1.5};
    opt.store_stride = 1000;  // keep only t = 0 snapshot slot
    opt.n_threads = 2;
    opt.store_stride = 6;
    auto hist = evolve(m, g, data, nullptr, 1.5, opt);
    REQUIRE(!hist.stored.empty());
    const auto& st = hist.stored.back();
    const double h = g.h();
    double worst = 0.0;
    const int jc = n / 2, kc = n / 2;
    for (int i = 1; i < n - 1; ++i) {
      const double x1 = -g.extent + h * i;
      if (std::abs(x1) > 3.0) continue;
      const double val = st.u[(static_cast<size_t>(i) * n + jc) * n + kc];
      worst = std::max(worst, std::abs(val - prof(x1 - st.t)));
    }
    errs[idx++] = worst;
  }
  CHECK(errs[1] <= 0.12);           // dispersive error of the second-order stencil
  CHECK(errs[0] / errs[1] >= 2.0);  // improves under refinement
}

TEST_CASE("energy of the zero field vanishes") {
  auto m = MetricModel::minkowski();
  GridSpec g = small_grid(24, 6.0, 0.25);
  g.sponge_width = 4.5 * g.h();
  std::vector<double> z(static_cast<size_t>(g.n) * g.n * g.n, 0.0);
  CHECK(energy(m, g, z, z) == 0.0);
}

TEST_CASE("energy quadrature matches the closed-form gaussian integral") {
  auto m = MetricModel::minkowski();
  GridSpec g = small_grid(96, 8.0, 0.25);
  const int n = g.n;
  const double s2 = 4.0;  // u = exp(-|x|^2 / 4)
  std::vector<double> u(static_cast<size_t>(n) * n * n, 0.0), v(u);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Vec3 x{-g.extent + g.h() * i, -g.extent + g.h() * j, -g.extent + g.h() * k};
        u[(static_cast<size_t>(i) * n + j) * n + k] = std::exp(-norm2(x) / s2);
      }
  const double a = 2.0 / s2;
  const double exact = (4.0 / (s2 * s2)) * 1.5 / a * std::pow(kPi / a, 1.5);
  CHECK(energy(m, g, u, v) == doctest::Approx(exact).epsilon(0.01));
}

TEST_CASE("energy coercivity against the flat gradient norm") {
  auto shell = MetricModel::trapped_shell(4.0, 8.0, 1.6);
  GridSpec g = small_grid(48, 16.0, 0.5);
  const int n = g.n;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ur(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    // random smooth field: a few gaussians
    std::vector<double> u(static_cast<size_t>(n) * n * n, 0.0), v(u);
    std::vector<Vec3> centers;
    for (int c = 0; c < 4; ++c) centers.push_back({8 * ur(rng), 8 * ur(rng), 8 * ur(rng)});
    double flat_sq = 0.0;
    for (int i = 1; i < n - 1; ++i)
      for (int j = 1; j < n - 1; ++j)
        for (int k = 1; k < n - 1; ++k) {
          const Vec3 x{-g.extent + g.h() * i, -g.extent + g.h() * j, -g.extent + g.h() * k};
          double val = 0.0;
          for (const auto& c : centers) val += std::exp(-norm2(x - c) / 6.0);
          u[(static_cast<size_t>(i) * n + j) * n + k] = val;
          v[(static_cast<size_t>(i) * n + j) * n + k] = 0.3 * val;
        }
    // flat-metric energy of the same snapshot via the same quadrature
    const double e_flat = energy(MetricModel::minkowski(), g, u, v);
    const double e = energy(shell, g, u, v);
    CHECK(e >= shell.c_ell() * e_flat * 0.9);
    CHECK(e <= shell.C_ell() * e_flat * 1.1);
  }
}

TEST_CASE("dissipation residual is second order and energy is monotone") {
  // smooth well-resolved data keeps the defect in its h^2-dominated regime
  auto m = MetricModel::minkowski().with_damping(DampingProfile({{{0, 0, 0}, 10.0, 0.3}}));
  WaveData data;
  data.u0 = bump_data({0, 0, 0}, 5.0, 1.0);
  double res[2];
  int idx = 0;
  for (int n : {48, 96}) {
    GridSpec g = small_grid(n, 20.0, 1.0);
    const double dtc = 0.4 * g.h();
    g.snapshot_dt = 2.0 * dtc;
    EvolveOptions opt;
    opt.t_checkpoints = {8.0};
    opt.n_threads = 2;
    auto hist = evolve(m, g, data, nullptr, 8.0, opt);
    res[idx++] = dissipation_residual(hist);
    for (size_t i = 1; i < hist.energy_trace.size(); ++i)
      CHECK(hist.energy_trace[i].energy <=
            hist.energy_trace[i - 1].energy * (1.0 + 1e-9));
  }
  CHECK(res[0] / res[1] >= 2.5);
  CHECK(res[0] / res[1] <= 6.0);
  CHECK(res[1] <= 0.02);
}

TEST_CASE("dissipation identity with forcing keeps the same order") {
  auto m = MetricModel::minkowski().with_damping(DampingProfile({{{0, 0, 0}, 6.0, 0.2}}));
  WaveData data;
  data.u0 = bump_data({0, 0, 0}, 4.0, 1.0);
  Forcing f = [](double t, const Vec3& x) {
    return 0.4 * std::sin(1.3 * t) * std::exp(-norm2(x) / 9.0);
  };
  double res[2];
  int idx = 0;
  for (int n : {48, 96}) {
    GridSpec g = small_grid(n, 16.0, 1.0);
    g.snapshot_dt = 2.0 * 0.4 * g.h();
    EvolveOptions opt;
    opt.t_checkpoints = {8.0};
    opt.n_threads = 2;
    auto hist = evolve(m, g, data, f, 8.0, opt);
    res[idx++] = dissipation_residual(hist);
  }
  CHECK(res[0] / res[1] >= 2.5);
  CHECK(res[0] / res[1] <= 6.5);
}

TEST_CASE("cross-term and mixed-flux paths conserve energy") {
  // crossterm_toy exercises the predictor-corrector pass
  {
    auto m = MetricModel::crossterm_toy(0.05);
    WaveData data;
    data.u0 = bump_data({0, 0, 0}, 3.0, 1.0);
    GridSpec g = small_grid(48, 12.0, 0.25);
    EvolveOptions opt;
    opt.t_checkpoints = {4.0};
    opt.n_threads = 2;
    auto hist = evolve(m, g, data, nullptr, 4.0, opt);
    double e_max = 0.0, e_min = 1e300;
    for (const auto& s : hist.energy_trace) {
      e_max = std::max(e_max, s.energy);
      e_min = std::min(e_min, s.energy);
    }
    CHECK((e_max - e_min) / e_max <= 0.02);
  }
  // constant anisotropic metric exercises the mixed staggered fluxes
  {
    MetricModel m(std::make_shared<AnisotropicGeometry>(), DampingProfile{});
    WaveData data;
    data.u0 = bump_data({0, 0, 0}, 3.0, 1.0);
    GridSpec g = small_grid(48, 12.0, 0.25);
    EvolveOptions opt;
    opt.t_checkpoints = {4.0};
    opt.n_threads = 2;
    auto hist = evolve(m, g, data, nullptr, 4.0, opt);
    double e_max = 0.0, e_min = 1e300;
    for (const auto& s : hist.energy_trace) {
      e_max = std::max(e_max, s.energy);
      e_min = std::min(e_min, s.energy);
    }
    CHECK((e_max - e_min) / e_max <= 0.02);
  }
}

TEST_CASE("evolve refuses CFL violations and thin sponges") {
  auto m = MetricModel::trapped_shell(4.0, 8.0, 1.6);
  WaveData data;
  data.u0 = bump_data({0, 0, 0}, 2.0, 1.0);
  GridSpec g = small_grid(32, 8.0, 0.25);
  g.dt = 10.0;
  CHECK_THROWS_AS(evolve(m, g, data, nullptr, 1.0, {}), std::invalid_argument);
  GridSpec g2 = small_grid(32, 8.0, 0.25);
  g2.sponge_width = 0.5;
  CHECK_THROWS_AS(evolve(m, g2, data, nullptr, 1.0, {}), std::invalid_argument);
}

TEST_CASE("local-energy norms: zero field and forcing oracle") {
  auto m = MetricModel::minkowski();
  GridSpec g = small_grid(48, 16.0, 0.5);
  EvolveOptions opt;
  opt.t_checkpoints = {1.0};
  opt.n_threads = 2;

  // u == 0 with no forcing: every norm vanishes
  {
    WaveData none;
    auto hist = evolve(m, g, none, nullptr, 1.0, opt);
    const auto rep = le_norms(hist, 0);
    CHECK(rep.le == 0.0);
    CHECK(rep.le1 == 0.0);
    CHECK(rep.le_star_f == 0.0);
  }

  // time-independent forcing: LE* of f against a grid quadrature done here
  {
    WaveData none;
    auto F = [](const Vec3& x) { return std::exp(-norm2(x) / 16.0); };
    Forcing f = [&](double, const Vec3& x) { return F(x); };
    auto hist = evolve(m, g, none, f, 1.0, opt);
    const auto rep = le_norms(hist, 0);
    // oracle: same lattice, annuli from <x>, exact time integral over [0, 1]
    const int n = g.n;
    const double vol = g.h() * g.h() * g.h();
    std::vector<double> per(16, 0.0);
    for (int i = 1; i < n - 1; ++i)
      for (int j = 1; j < n - 1; ++j)
        for (int k = 1; k < n - 1; ++k) {
          const Vec3 x{-g.extent + g.h() * i, -g.extent + g.h() * j, -g.extent + g.h() * k};
          const double br = jbracket(x);
          const int aj = std::max(0, static_cast<int>(std::floor(std::log2(br))));
          per[static_cast<size_t>(aj)] += br * F(x) * F(x) * vol;
        }
    double oracle = 0.0;
    for (double p : per) oracle += std::sqrt(p);
    CHECK(rep.le_star_f == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(rep.f_l1l2 > 0.0);
  }
}

TEST_CASE("annulus weight monotonicity and T-nesting of the accumulators") {
  auto m = MetricModel::trapped_shell(2.0, 5.0, 1.0);
  WaveData data;
  data.u0 = bump_data({3.5, 0, 0}, 3.0, 1.0);
  GridSpec g = small_grid(48, 16.0, 0.5);
  EvolveOptions opt;
  opt.t_checkpoints = {2.0, 5.0};
  opt.n_threads = 2;
  auto hist = evolve(m, g, data, nullptr, 5.0, opt);
  REQUIRE(hist.checkpoints.size() == 2);
  const auto& c1 = hist.checkpoints[0];
  const auto& c2 = hist.checkpoints[1];
  for (size_t j = 0; j < c1.du_sq.size(); ++j) {
    CHECK(c1.u32_sq[j] <= c1.u12_sq[j] * (1.0 + 1e-12));  // <x>^{-3} <= <x>^{-1}
    CHECK(c1.du_sq[j] <= c2.du_sq[j] * (1.0 + 1e-12));    // time-interval nesting
    CHECK(c1.u12_sq[j] <= c2.u12_sq[j] * (1.0 + 1e-12));
  }
  CHECK(c1.sup_grad_norm <= c2.sup_grad_norm * (1.0 + 1e-12));
  const auto r1 = le_norms(hist, 0);
  const auto r2 = le_norms(hist, 1);
  CHECK(r1.le1 <= r2.le1 * (1.0 + 1e-12));
}

TEST_CASE("uniform energy bound: sup-in-time gradient controlled by the data") {
  // f = 0, a >= 0: E is non-increasing, so ||du(t)|| stays within the
  // coercivity ratio of ||du(0)||
  auto m = MetricModel::trapped_shell(4.0, 8.0, 1.6)
               .with_damping(DampingProfile({{{0, 0, 0}, 14.0, 1.0}}));
  WaveData data;
  data.u0 = bump_data({5.267, 0, 0}, 2.5, 1.0);
  GridSpec g = small_grid(48, 16.0, 0.5);
  EvolveOptions opt;
  opt.t_checkpoints = {6.0};
  opt.n_threads = 2;
  const auto hist = evolve(m, g, data, nullptr, 6.0, opt);
  const double kappa = std::sqrt(std::max(m.C_ell(), 1.0) / std::min(m.c_ell(), 1.0));
  CHECK(hist.checkpoints[0].sup_grad_norm <= kappa * hist.data_grad_norm * 1.05);
}

TEST_CASE("discrete finite speed of propagation") {
  auto m = MetricModel::trapped_shell(4.0, 8.0, 1.6);  // C_ell = 5
  WaveData data;
  data.u0 = bump_data({0, 0, 0}, 2.0, 1.0);
  GridSpec g = small_grid(48, 16.0, 0.5);
  EvolveOptions opt;
  opt.t_checkpoints = {4.0};
  opt.n_threads = 2;
  auto hist = evolve(m, g, data, nullptr, 4.0, opt);
  const double speed = std::sqrt(m.C_ell());
  for (const auto& s : hist.energy_trace) {
    if (s.t == 0.0) continue;
    CHECK(s.support_radius <= 2.0 + speed * s.t + 6.0 * g.h());
  }
}

TEST_CASE("grid independence of LE1 on a resolved scenario") {
  auto m = MetricModel::minkowski();
  WaveData data;
  data.u0 = bump_data({0, 0, 0}, 5.0, 1.0);
  double le1[2];
  int idx = 0;
  for (int n : {48, 96}) {
    GridSpec g = small_grid(n, 16.0, 0.5);
    EvolveOptions opt;
    opt.t_checkpoints = {6.0};
    opt.n_threads = 2;
    auto hist = evolve(m, g, data, nullptr, 6.0, opt);
    le1[idx++] = le_norms(hist, 0).le1;
  }
  CHECK(std::abs(le1[0] - le1[1]) / le1[1] < 0.05);
}

TEST_CASE("led experiment rows and monotone numerators") {
  auto m = MetricModel::trapped_shell(2.0, 5.0, 1.0);
  WaveData data;
  data.u0 = bump_data({3.544522, 0, 0}, 2.0, 1.0);
  GridSpec g = small_grid(48, 16.0, 0.5);
  const auto rows = led_experiment(m, g, data, nullptr, {2.0, 4.0, 8.0}, 2);
  REQUIRE(rows.size() == 3);
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].denominator > 0.0);
    CHECK(rows[i].rho == doctest::Approx(rows[i].numerator / rows[i].denominator));
    if (i > 0) CHECK(rows[i].numerator >= rows[i - 1].numerator * (1.0 - 1e-12));
  }
}

TEST_CASE("history binary round trip") {
  auto m = MetricModel::minkowski();
  WaveData data;
  data.u0 = bump_data({0, 0, 0}, 2.0, 1.0);
  GridSpec g = small_grid(24, 6.0, 0.25);
  g.sponge_width = 4.5 * g.h();
  EvolveOptions opt;
  opt.t_checkpoints = {0.5};
  opt.store_stride = 1;
  auto hist = evolve(m, g, data, nullptr, 0.5, opt);
  REQUIRE(hist.stored.size() >= 2);

  const std::string path = "test_history.bin";
  write_history_binary(hist, path);
  FILE* fp = std::fopen(path.c_str(), "rb");
  REQUIRE(fp != nullptr);
  auto get = [&] {
    double v = 0.0;
    REQUIRE(std::fread(&v, sizeof(double), 1, fp) == 1);
    return v;
  };
  CHECK(get() == doctest::Approx(static_cast<double>(g.n)));
  CHECK(get() == doctest::Approx(g.extent));
  CHECK(get() == doctest::Approx(hist.grid.dt));
  const auto count = static_cast<size_t>(get());
  CHECK(count == hist.stored.size());
  for (size_t i = 0; i < count; ++i) CHECK(get() == doctest::Approx(hist.stored[i].t));
  // first snapshot's u field follows, byte-exact
  std::vector<double> u0(hist.stored[0].u.size());
  REQUIRE(std::fread(u0.data(), sizeof(double), u0.size(), fp) == u0.size());
  CHECK(u0 == hist.stored[0].u);
  std::fclose(fp);
  std::remove(path.c_str());
}

TEST_CASE("evolution is bitwise deterministic across thread counts") {
  auto m = MetricModel::trapped_shell(2.0, 5.0, 1.0)
               .with_damping(DampingProfile({{{0, 0, 0}, 6.0, 0.5}}));
  WaveData data;
  data.u0 = bump_data({3.5, 0, 0}, 2.5, 1.0);
  GridSpec g = small_grid(32, 8.0, 0.25);
  WaveHistory h1, h2;
  for (int pass = 0; pass < 2; ++pass) {
    EvolveOptions opt;
    opt.t_checkpoints = {1.5};
    opt.n_threads = pass == 0 ? 1 : 4;
    opt.store_stride = 2;
    (pass == 0 ? h1 : h2) = evolve(m, g, data, nullptr, 1.5, opt);
  }
  REQUIRE(h1.energy_trace.size() == h2.energy_trace.size());
  for (size_t i = 0; i < h1.energy_trace.size(); ++i)
    CHECK(h1.energy_trace[i].energy == h2.energy_trace[i].energy);
  REQUIRE(h1.stored.size() == h2.stored.size());
  for (size_t i = 0; i < h1.stored.size(); ++i) CHECK(h1.stored[i].u == h2.stored[i].u);
}
