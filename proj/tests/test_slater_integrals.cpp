#include <doctest.h>

#include <cmath>
#include <thread>
#include <vector>

#include "h2pt/errors.hpp"
#include "h2pt/parallel.hpp"
#include "h2pt/slater_integrals.hpp"

using namespace h2pt;

namespace {

double param(const HubbardParams& p, Integrand id) {
  switch (id) {
    case Integrand::S: return p.S;
    case Integrand::eps: return p.eps;
    case Integrand::t: return p.t;
    case Integrand::U: return p.U;
    case Integrand::K: return p.K;
    case Integrand::J: return p.J;
    case Integrand::V: return p.V;
  }
  return NAN;
}

const OrbitalGeometry kEquilibrium{1.41968, 1.199206};
const OrbitalGeometry kMetastable{1.244701, 1.307372};

}  // namespace

TEST_CASE("overlap limits and closed form") {
  CHECK(overlap({1e-7, 1.0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(overlap({200.0, 1.0}) < 1e-80);
  const double rho = kEquilibrium.rho();
  CHECK(overlap(kEquilibrium) == doctest::Approx(std::exp(-rho) * (1 + rho + rho * rho / 3)).epsilon(1e-15));
  CHECK(overlap(kEquilibrium) == doctest::Approx(0.6686).epsilon(1e-4));

  const OracleValue q = quadrature_oracle(Integrand::S, kEquilibrium);
  CHECK(std::abs(q.value - overlap(kEquilibrium)) < 1e-10);
  CHECK(q.error < 1e-10);
}

TEST_CASE("overlap depends only on rho") {
  CHECK(overlap({2.0, 0.7}) == doctest::Approx(overlap({1.4, 1.0})).epsilon(1e-15));
  CHECK(overlap({0.5, 2.8}) == doctest::Approx(overlap({1.4, 1.0})).epsilon(1e-15));
}

TEST_CASE("invalid geometry is rejected") {
  CHECK_THROWS_AS(overlap({-1.0, 1.0}), InputError);
  CHECK_THROWS_AS(overlap({1.0, 0.0}), InputError);
  CHECK_THROWS_AS(hubbard_params({NAN, 1.0}), InputError);
  CHECK_THROWS_AS(hubbard_params({1.0, INFINITY}), InputError);
  CHECK_THROWS_AS(quadrature_oracle(Integrand::U, {0.0, 1.0}), InputError);
}

TEST_CASE("Wannier coefficients") {
  const auto w0 = wannier_coefficients(0.0);
  CHECK(w0.a == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w0.b == 0.0);

  const auto near = wannier_coefficients(1.0 - 1e-10);
  CHECK(near.b == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(near.a > 1e3);

  CHECK_THROWS_AS(wannier_coefficients(1.0), InputError);
  CHECK_THROWS_AS(wannier_coefficients(1.5), InputError);
  CHECK_THROWS_AS(wannier_coefficients(-0.1), InputError);
  CHECK_THROWS_AS(wannier_coefficients(NAN), InputError);

  // a^2 (1 + b^2 - 2bS) = 1 and 2b - S(1 + b^2) = 0 for every S.
  for (double S : {0.1, 0.4, 0.6686, 0.95}) {
    const auto [a, b] = wannier_coefficients(S);
    CHECK(a * a * (1 + b * b - 2 * b * S) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(2 * b - S * (1 + b * b)) < 1e-15);
  }
}

TEST_CASE("Wannier functions are orthonormal under quadrature") {
  for (const OrbitalGeometry& g : {kEquilibrium, OrbitalGeometry{0.7, 1.4}, OrbitalGeometry{4.0, 0.9}}) {
    CAPTURE(g.R);
    CHECK(wannier_overlap_oracle(1, 1, g).value == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(wannier_overlap_oracle(2, 2, g).value == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(wannier_overlap_oracle(1, 2, g).value) < 1e-8);
  }
  CHECK_THROWS_AS(wannier_overlap_oracle(0, 1, kEquilibrium), InputError);
}

TEST_CASE("reference integrals at two equilibrium geometries") {
  const HubbardParams p = hubbard_params(kEquilibrium);
  CHECK(std::abs(p.eps - -1.749493) < 1e-5);
  CHECK(std::abs(p.t - -0.737679) < 1e-5);
  CHECK(std::abs(p.U - 1.661254) < 1e-5);
  CHECK(std::abs(p.K - 0.962045) < 1e-5);
  CHECK(std::abs(p.J - 0.022040) < 1e-5);
  CHECK(std::abs(p.V - -0.011851) < 1e-5);

  const HubbardParams m = hubbard_params(kMetastable);
  CHECK(std::abs(m.eps - -1.70076) < 1e-5);
  CHECK(std::abs(m.t - -0.940627) < 1e-5);
  CHECK(std::abs(m.U - 1.81984) < 1e-5);
  CHECK(std::abs(m.K - 1.064996) < 1e-5);
  CHECK(std::abs(m.J - 0.0245259) < 1e-5);
  CHECK(std::abs(m.V - -0.0129176) < 1e-5);

  CHECK(std::abs(quadrature_oracle(Integrand::U, kEquilibrium).value - 1.661254) < 1e-5);
}

TEST_CASE("closed form agrees with quadrature on a grid") {
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const OrbitalGeometry g{0.5 + 4.5 * i / 3.0, 0.8 + 0.8 * j / 3.0};
      const HubbardParams p = hubbard_params(g);
      for (Integrand id : kAllIntegrands) {
        const OracleValue q = quadrature_oracle(id, g);
        const double v = param(p, id);
        CAPTURE(g.R);
        CAPTURE(g.alpha);
        CAPTURE(to_string(id));
        CHECK(std::abs(q.value - v) <= 1e-8 * std::abs(v));
        CHECK(q.error <= 1e-8);
      }
    }
  }
}

TEST_CASE("large separation asymptotes") {
  // At R = 50 the orbitals no longer overlap; what remains is the bare atom
  // plus the 2/R Coulomb tails of the other proton and electron.
  for (double alpha : {0.9, 1.0, 1.3}) {
    const OrbitalGeometry g{50.0, alpha};
    const HubbardParams p = hubbard_params(g);
    CAPTURE(alpha);
    CHECK(std::abs(p.t) < 1e-6);
    CHECK(std::abs(p.J) < 1e-6);
    CHECK(std::abs(p.V) < 1e-6);
    CHECK(std::abs(p.U - 1.25 * alpha) < 1e-6);
    CHECK(std::abs(p.K - 2.0 / g.R) < 1e-6);
    CHECK(std::abs(p.eps - (alpha * alpha - 2 * alpha - 2.0 / g.R)) < 1e-6);

    CHECK(std::abs(quadrature_oracle(Integrand::t, g).value) < 1e-6);
    CHECK(std::abs(quadrature_oracle(Integrand::J, g).value) < 1e-6);
    CHECK(std::abs(quadrature_oracle(Integrand::V, g).value) < 1e-6);
    CHECK(std::abs(quadrature_oracle(Integrand::U, g).value - 1.25 * alpha) < 1e-6);
    CHECK(std::abs(quadrature_oracle(Integrand::K, g).value - 2.0 / g.R) < 1e-6);
    CHECK(std::abs(quadrature_oracle(Integrand::eps, g).value - (alpha * alpha - 2 * alpha - 2.0 / g.R)) < 1e-6);
  }
}

TEST_CASE("exchange is non-negative and correlated hopping non-positive") {
  for (int i = 0; i <= 8; ++i) {
    for (int j = 0; j <= 4; ++j) {
      const OrbitalGeometry g{0.5 + 9.5 * i / 8.0, 0.8 + 0.8 * j / 4.0};
      CAPTURE(g.R);
      CAPTURE(g.alpha);
      const OracleValue J = quadrature_oracle(Integrand::J, g);
      const OracleValue V = quadrature_oracle(Integrand::V, g);
      CHECK(J.value >= -J.error);
      CHECK(V.value <= V.error);
    }
  }
}

TEST_CASE("integrals are smooth: Richardson ratio of central differences") {
  const OrbitalGeometry g{1.6, 1.1};
  auto derivative = [&](Integrand id, double h) {
    return (param(hubbard_params({g.R + h, g.alpha}), id) - param(hubbard_params({g.R - h, g.alpha}), id)) / (2 * h);
  };
  for (Integrand id : kAllIntegrands) {
    CAPTURE(to_string(id));
    const double d1 = derivative(id, 0.08);
    const double d2 = derivative(id, 0.04);
    const double d3 = derivative(id, 0.02);
    const double ratio = (d1 - d2) / (d2 - d3);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
  }
}

TEST_CASE("scaling with the orbital exponent") {
  // Coulomb-type integrals scale like alpha at fixed rho.
  for (double rho : {0.8, 1.7, 3.5}) {
    const HubbardParams unit = hubbard_params({rho, 1.0});
    for (double alpha : {0.8, 1.25, 1.6}) {
      const HubbardParams p = hubbard_params({rho / alpha, alpha});
      CAPTURE(rho);
      CAPTURE(alpha);
      CHECK(p.U == doctest::Approx(alpha * unit.U).epsilon(1e-13));
      CHECK(p.K == doctest::Approx(alpha * unit.K).epsilon(1e-13));
      CHECK(p.J == doctest::Approx(alpha * unit.J).epsilon(1e-12));
      CHECK(p.V == doctest::Approx(alpha * unit.V).epsilon(1e-12));
      CHECK(p.S == doctest::Approx(unit.S).epsilon(1e-14));
    }
  }
  // One-electron terms: x(rho, alpha) = alpha^2 T(rho) + alpha W(rho). Fit T, W
  // from two exponents and predict a third.
  for (double rho : {0.8, 1.7, 3.5}) {
    auto at = [&](double alpha) { return hubbard_params({rho / alpha, alpha}); };
    const double a1 = 0.9, a2 = 1.3, a3 = 1.6;
    const HubbardParams p1 = at(a1), p2 = at(a2), p3 = at(a3);
    for (auto field : {&HubbardParams::eps, &HubbardParams::t}) {
      const double det = a1 * a1 * a2 - a2 * a2 * a1;
      const double T = (p1.*field * a2 - p2.*field * a1) / det;
      const double W = (a1 * a1 * p2.*field - a2 * a2 * p1.*field) / det;
      CHECK(p3.*field == doctest::Approx(a3 * a3 * T + a3 * W).epsilon(1e-12));
    }
  }
}

TEST_CASE("concurrent evaluation matches serial") {
  std::vector<OrbitalGeometry> gs;
  for (int i = 0; i < 32; ++i) gs.push_back({0.6 + 0.15 * i, 0.9 + 0.02 * i});
  auto par = parallel_map(gs.size(), [&](std::size_t i) { return hubbard_params(gs[i]); }, 8);
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const HubbardParams s = hubbard_params(gs[i]);
    CHECK(par[i].U == s.U);
    CHECK(par[i].J == s.J);
    CHECK(par[i].t == s.t);
  }
}

TEST_CASE("oracle reports failure with its best value") {
  try {
    quadrature_oracle(Integrand::U, kEquilibrium, 1e-30);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.best_value() == doctest::Approx(1.661254).epsilon(1e-5));
    CHECK(e.error_estimate() > 1e-30);
  }
}

TEST_CASE("integrand names") {
  for (Integrand id : kAllIntegrands) CHECK(integrand_from_string(to_string(id)) == id);
  CHECK_FALSE(integrand_from_string("W").has_value());
}
