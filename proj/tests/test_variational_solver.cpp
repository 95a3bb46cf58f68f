#include <doctest.h>

#include <cmath>

#include "h2pt/errors.hpp"
#include "h2pt/variational_solver.hpp"

using namespace h2pt;

namespace {

struct Row {
  double gamma, R0, alpha0, E;
};

// Equilibrium rows as printed for the molecule with gain and loss.
const Row kRows[] = {
    {0.0, 1.41968, 1.199206, -2.323011},  {0.1, 1.413598, 1.202479, -2.314919}, {0.2, 1.396223, 1.211990, -2.290874},
    {0.3, 1.369845, 1.22690, -2.251536},  {0.4, 1.33742, 1.24609, -2.19787},    {0.5, 1.301859, 1.268341, -2.131022},
    {0.6, 1.265651, 1.292526, -2.052185}, {0.7, 1.230858, 1.317603, -1.962537}, {0.8, 1.199459, 1.342514, -1.863195},
    {0.9, 1.174508, 1.365733, -1.755232}, {1.0, 1.168653, 1.38188, -1.639820},
};

}  // namespace

TEST_CASE("equilibrium at gamma = 0") {
  const EquilibriumPoint eq = equilibrium(0.0);
  CHECK(eq.stability == Stability::Stable);
  CHECK(std::abs(eq.R0 - 1.41968) < 2e-3);
  CHECK(std::abs(eq.alpha0 - 1.199206) < 2e-3);
  CHECK(std::abs(eq.E_total - -2.323011) < 5e-4);
  CHECK(eq.E_diss == doctest::Approx(kAtomicLimit - eq.E_total).epsilon(1e-15));
  CHECK(eq.E_total == doctest::Approx(total_energy(eq.R0, eq.alpha0, 0.0)).epsilon(1e-14));
}

TEST_CASE("equilibrium rows across gamma") {
  std::vector<double> gs;
  for (const Row& r : kRows) gs.push_back(r.gamma);
  const auto eqs = sweep(gs);
  REQUIRE(eqs.size() == gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    CAPTURE(gs[i]);
    CHECK(eqs[i].gamma == gs[i]);
    CHECK(std::abs(eqs[i].R0 - kRows[i].R0) < 5e-3);
    CHECK(std::abs(eqs[i].alpha0 - kRows[i].alpha0) < 5e-3);
    CHECK(std::abs(eqs[i].E_total - kRows[i].E) < 5e-3);
  }
  CHECK(eqs[6].stability == Stability::Stable);
  CHECK(eqs[7].stability == Stability::Metastable);
  CHECK(eqs[9].stability == Stability::Metastable);
  CHECK(equilibrium(1.2).stability == Stability::Unbound);
  CHECK(std::isnan(equilibrium(1.2).E_diss));
}

TEST_CASE("monotone trends on the tabulated gamma grid") {
  // On a finer grid R0 bottoms out near gamma = 0.97, ahead of the rise at
  // the dissociation threshold; the 0.1 grid does not resolve it.
  const auto eqs = sweep(linear_grid(0.0, 1.0, 10));
  for (std::size_t i = 1; i < eqs.size(); ++i) {
    CAPTURE(eqs[i].gamma);
    CHECK(eqs[i].E_total > eqs[i - 1].E_total);
    CHECK(eqs[i].R0 < eqs[i - 1].R0);
    CHECK(eqs[i].alpha0 > eqs[i - 1].alpha0);
  }
}

TEST_CASE("sweep matches serial evaluation") {
  const std::vector<double> gs = {0.25, 0.05, 0.75};
  const auto par = sweep(gs);
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const EquilibriumPoint s = equilibrium(gs[i]);
    CHECK(par[i].R0 == s.R0);
    CHECK(par[i].E_total == s.E_total);
  }
}

TEST_CASE("stationarity of the equilibrium") {
  for (double g : {0.0, 0.5, 0.9}) {
    CAPTURE(g);
    const EquilibriumPoint eq = equilibrium(g);
    const double h = 1e-4;
    const double dR = (total_energy(eq.R0 + h, eq.alpha0, g) - total_energy(eq.R0 - h, eq.alpha0, g)) / (2 * h);
    const double da = (total_energy(eq.R0, eq.alpha0 + h, g) - total_energy(eq.R0, eq.alpha0 - h, g)) / (2 * h);
    CHECK(std::abs(dR) < 1e-5);
    CHECK(std::abs(da) < 1e-5);
    // A minimum, not a saddle, in both directions.
    CHECK(total_energy(eq.R0 + 0.01, eq.alpha0, g) > eq.E_total);
    CHECK(total_energy(eq.R0, eq.alpha0 + 0.01, g) > eq.E_total);
  }
}

TEST_CASE("restarts from different brackets agree") {
  const EquilibriumPoint ref = equilibrium(0.3);
  for (auto [lo, hi] : {std::pair{1.0, 2.0}, std::pair{1.2, 1.6}, std::pair{0.8, 3.0}}) {
    const EquilibriumPoint eq = refine_equilibrium(0.3, lo, hi);
    CHECK(eq.R0 == doctest::Approx(ref.R0).epsilon(1e-6));
    CHECK(eq.E_total == doctest::Approx(ref.E_total).epsilon(1e-12));
  }
}

TEST_CASE("separated atoms") {
  const AlphaOptimum far = optimize_alpha(50.0, 0.0);
  CHECK(far.alpha == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(far.energy == doctest::Approx(kAtomicLimit).epsilon(1e-5));
  // The orbital contracts at short range, dips slightly below the atomic
  // exponent around R = 4 and returns to it from below.
  double prev = optimize_alpha(1.4, 0.0).alpha;
  for (double R : {2.0, 3.0, 4.0}) {
    const double a = optimize_alpha(R, 0.0).alpha;
    CHECK(a < prev);
    prev = a;
  }
  CHECK(prev < 0.995);
  for (double R : {5.0, 6.0, 8.0, 12.0}) {
    const double a = optimize_alpha(R, 0.0).alpha;
    CHECK(a > prev);
    CHECK(a < 1.0);
    prev = a;
  }
  CHECK(std::abs(prev - 1.0) < 1e-5);
}

TEST_CASE("sub-atomic exponent at R = 4 survives quadrature integrals") {
  auto energy = [](double R, double alpha) {
    HubbardParams p;
    const OrbitalGeometry g{R, alpha};
    p.S = quadrature_oracle(Integrand::S, g).value;
    p.eps = quadrature_oracle(Integrand::eps, g).value;
    p.t = quadrature_oracle(Integrand::t, g).value;
    p.U = quadrature_oracle(Integrand::U, g).value;
    p.K = quadrature_oracle(Integrand::K, g).value;
    p.J = quadrature_oracle(Integrand::J, g).value;
    p.V = quadrature_oracle(Integrand::V, g).value;
    return 2.0 / R + ground_energy(p, 0.0);
  };
  const double a = optimize_alpha(4.0, 0.0).alpha;
  CHECK(energy(4.0, a) < energy(4.0, 1.0) - 1e-6);
  CHECK(energy(4.0, a) < energy(4.0, a + 0.002));
  CHECK(energy(4.0, a) < energy(4.0, a - 0.002));
}

TEST_CASE("thresholds separate the phases") {
  const double g_pt = find_gamma_pt();
  CHECK(std::abs(g_pt - 0.520873) < 1e-3);
  CHECK_FALSE(equilibrium(g_pt - 1e-3).stability == Stability::Unbound);
  auto broken = [](double g) {
    const EquilibriumPoint eq = equilibrium(g);
    return pt_phase(hubbard_params({eq.R0, eq.alpha0}), g);
  };
  CHECK_FALSE(broken(g_pt - 1e-3));
  CHECK(broken(g_pt + 1e-3));

  const double g_ms = find_gamma_ms();
  CHECK(std::abs(g_ms - 0.659374) < 1e-3);
  CHECK(equilibrium(g_ms - 1e-3).stability == Stability::Stable);
  CHECK(equilibrium(g_ms + 1e-3).stability == Stability::Metastable);
  CHECK(std::abs(equilibrium(g_ms).E_diss) < 1e-5);

  const double g_d = find_gamma_d();
  CHECK(std::abs(g_d - 1.024638) < 5e-3);
  CHECK(equilibrium(g_d).bound());
  CHECK(equilibrium(g_d - 1e-3).bound());
  CHECK_FALSE(equilibrium(g_d + 1e-3).bound());
}

TEST_CASE("energy curve") {
  const auto grid = linear_grid(0.8, 3.0, 22);
  CHECK(grid.size() == 23);
  CHECK(grid.front() == 0.8);
  CHECK(grid.back() == 3.0);
  const EnergyCurve c = energy_curve(0.0, grid);
  REQUIRE(c.samples.size() == grid.size());
  const EquilibriumPoint eq = equilibrium(0.0);
  for (const CurveSample& s : c.samples) {
    CHECK(s.E_total[3].real() >= eq.E_total - 1e-12);
    CHECK(s.E_total[3].real() == doctest::Approx(2.0 / s.R + ground_energy(s.params, 0.0)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(energy_curve(0.0, {1.0, 1.0}), InputError);
  CHECK_THROWS_AS(energy_curve(0.0, {}), InputError);
  CHECK_THROWS_AS(energy_curve(0.0, {-1.0, 1.0}), InputError);
  CHECK_THROWS_AS(linear_grid(1.0, 0.0, 4), InputError);
  CHECK_THROWS_AS(linear_grid(0.0, 1.0, 0), InputError);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(equilibrium(NAN), InputError);
  CHECK_THROWS_AS(equilibrium(-0.1), InputError);
  CHECK_THROWS_AS(total_energy(-1.0, 1.0, 0.0), InputError);
  CHECK_THROWS_AS(optimize_alpha(1.4, INFINITY), InputError);
}

TEST_CASE("alpha window edge is reported") {
  SolverOptions narrow;
  narrow.alpha_min = 1.3;
  narrow.alpha_max = 1.5;
  CHECK_THROWS_AS(optimize_alpha(1.4, 0.0, narrow), NumericalError);
}

TEST_CASE("charge density") {
  const OrbitalGeometry g0{1.41968, 1.199206};
  GridSpec vol;
  vol.plane = DensityPlane::volume;
  vol.n = 121;
  vol.half_width = 7.0;
  const DensityGrid d = density_grid(g0, vol);
  CHECK(d.values.size() == 121u * 121u * 121u);
  CHECK(std::abs(d.integral() - 2.0) < 1e-3);

  for (double x : {0.0, 0.3, 1.1})
    for (double z : {0.2, 0.7, 2.5}) CHECK(density_at(g0, x, 0.4, z) == doctest::Approx(density_at(g0, x, 0.4, -z)));
  CHECK(density_at(g0, 0.5, 0.0, 0.3) == doctest::Approx(density_at(g0, 0.0, 0.5, 0.3)));

  GridSpec plane;
  plane.n = 101;
  const OrbitalGeometry gms{1.244701, 1.307372};
  CHECK(density_grid(gms, plane).peak() > density_grid(g0, plane).peak());
  CHECK_THROWS_AS(density_grid(g0, plane).integral(), InputError);
  plane.n = 1;
  CHECK_THROWS_AS(density_grid(g0, plane), InputError);
}
