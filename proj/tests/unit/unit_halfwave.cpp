#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "gcwave/halfwave.hpp"

using namespace gcwave;

namespace {

std::vector<MetricModel> builtins() {
  return {MetricModel::minkowski(), MetricModel::trapped_shell(4.0, 8.0, 1.6),
          MetricModel::crossterm_toy(0.05)};
}

PhasePoint random_point(std::mt19937_64& rng, double x_r, double xi_r) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3 x{u(rng) * x_r, u(rng) * x_r, u(rng) * x_r};
  Vec3 xi;
  do {
    xi = Vec3{u(rng) * xi_r, u(rng) * xi_r, u(rng) * xi_r};
  } while (norm2(xi) < 1e-4);
  return {x, xi};
}

}  // namespace

TEST_CASE("principal symbol point values") {
  auto mink = MetricModel::minkowski();
  CHECK(p_symbol(mink, {0.0, 1.0, {0, 0, 0}, {1, 0, 0}}) == doctest::Approx(0.0));
  CHECK(p_symbol(mink, {0.0, 2.0, {5, 5, 5}, {1, 0, 0}}) == doctest::Approx(-3.0));

  auto shell = MetricModel::trapped_shell(0.5, 5.0, 1.0);
  CHECK(p_symbol(shell, {0.0, 0.0, {5, 0, 0}, {0, 1, 0}}) == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("half-wave symbol point values") {
  auto mink = MetricModel::minkowski();
  CHECK(b_pm(mink, {{0, 0, 0}, {3, 4, 0}}, Branch::plus) == doctest::Approx(5.0));
  CHECK(b_pm(mink, {{0, 0, 0}, {3, 4, 0}}, Branch::minus) == doctest::Approx(-5.0));

  auto cross = MetricModel::crossterm_toy(0.05);
  CHECK(b_pm(cross, {{0, 0, 0}, {0, 1, 0}}, Branch::plus) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(b_pm(cross, {{0, 0, 0}, {0, 1, 0}}, Branch::minus) == doctest::Approx(-1.0).epsilon(1e-14));

  auto shell = MetricModel::trapped_shell(0.5, 5.0, 1.0);
  CHECK(b_pm(shell, {{5, 0, 0}, {0, 1, 0}}, Branch::plus) ==
        doctest::Approx(std::sqrt(1.5)).epsilon(1e-14));
}

TEST_CASE("sign property: b+ > 0 > b- with zero violations") {
  std::mt19937_64 rng(13);
  for (const auto& m : builtins()) {
    int violations = 0;
    for (int i = 0; i < 100000; ++i) {
      const PhasePoint pt = random_point(rng, 20.0, 10.0);
      if (!(b_pm(m, pt, Branch::plus) > 0.0)) ++violations;
      if (!(b_pm(m, pt, Branch::minus) < 0.0)) ++violations;
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("factorization p = -(tau - b+)(tau - b-)") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ut(-12.0, 12.0);
  for (const auto& m : builtins()) {
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const PhasePoint pt = random_point(rng, 20.0, 10.0);
      const double tau = ut(rng);
      const double p = p_symbol(m, {0.0, tau, pt.x, pt.xi});
      const double bp = b_pm(m, pt, Branch::plus);
      const double bm = b_pm(m, pt, Branch::minus);
      const double factored = -(tau - bp) * (tau - bm);
      worst = std::max(worst, std::abs(p - factored) / (1.0 + std::abs(p)));
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("degree-1 homogeneity of b_pm") {
  std::mt19937_64 rng(19);
  for (const auto& m : builtins()) {
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const PhasePoint pt = random_point(rng, 15.0, 5.0);
      for (double lam : {0.5, 2.0, 10.0}) {
        for (Branch br : {Branch::plus, Branch::minus}) {
          const double lhs = b_pm(m, {pt.x, lam * pt.xi}, br);
          const double rhs = lam * b_pm(m, pt, br);
          worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
        }
      }
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("analytic b gradients match finite differences") {
  std::mt19937_64 rng(23);
  const double h = 1e-6;
  for (const auto& m : builtins()) {
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
      const PhasePoint pt = random_point(rng, 12.0, 4.0);
      for (Branch br : {Branch::plus, Branch::minus}) {
        const BValue bv = b_pm_grad(m, pt, br);
        for (int k = 0; k < 3; ++k) {
          Vec3 xp = pt.x, xm = pt.x;
          xp[k] += h;
          xm[k] -= h;
          const double fdx = (b_pm(m, {xp, pt.xi}, br) - b_pm(m, {xm, pt.xi}, br)) / (2 * h);
          worst = std::max(worst, std::abs(bv.dx[k] - fdx) / (1.0 + std::abs(bv.dx[k])));
          Vec3 qp = pt.xi, qm = pt.xi;
          qp[k] += h;
          qm[k] -= h;
          const double fdxi = (b_pm(m, {pt.x, qp}, br) - b_pm(m, {pt.x, qm}, br)) / (2 * h);
          worst = std::max(worst, std::abs(bv.dxi[k] - fdxi) / (1.0 + std::abs(bv.dxi[k])));
        }
      }
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("phi_scale normalizes and is idempotent") {
  auto mink = MetricModel::minkowski();
  const PhasePoint p1 = phi_scale(mink, {{1, 1, 1}, {0, 0, 4}}, Branch::plus);
  CHECK(p1.xi[2] == doctest::Approx(1.0));

  auto shell = MetricModel::trapped_shell(0.5, 5.0, 1.0);
  const PhasePoint p2 = phi_scale(shell, {{5, 0, 0}, {0, 2, 0}}, Branch::plus);
  CHECK(p2.xi[1] == doctest::Approx(1.0 / std::sqrt(1.5)).epsilon(1e-13));

  std::mt19937_64 rng(29);
  for (const auto& m : builtins()) {
    for (int i = 0; i < 300; ++i) {
      const PhasePoint pt = random_point(rng, 15.0, 6.0);
      for (Branch br : {Branch::plus, Branch::minus}) {
        const PhasePoint q = phi_scale(m, pt, br);
        CHECK(std::abs(std::abs(b_pm(m, q, br)) - 1.0) <= 1e-12);
        const PhasePoint qq = phi_scale(m, q, br);
        CHECK(norm(qq.xi - q.xi) <= 1e-12 * norm(q.xi));
      }
    }
  }
}

TEST_CASE("b-scale bound contains dense samples") {
  auto shell = MetricModel::trapped_shell(4.0, 8.0, 1.6);
  const auto bounds = estimate_b_scale(shell, 32.0);
  CHECK(bounds.c_b > 0.0);
  CHECK(bounds.C_b > bounds.c_b);
  std::mt19937_64 rng(31);
  for (int i = 0; i < 20000; ++i) {
    const PhasePoint pt = random_point(rng, 28.0, 3.0);
    for (Branch br : {Branch::plus, Branch::minus}) {
      const double b_unit = std::abs(b_pm(shell, {pt.x, pt.xi / norm(pt.xi)}, br));
      CHECK(b_unit >= bounds.c_b);
      CHECK(b_unit <= bounds.C_b);
      // |xi / b(x, xi)| lies in [1/C_b, 1/c_b]
      const double ratio = norm(pt.xi) / std::abs(b_pm(shell, pt, br));
      CHECK(ratio >= 1.0 / bounds.C_b - 1e-12);
      CHECK(ratio <= 1.0 / bounds.c_b + 1e-12);
    }
  }
}
