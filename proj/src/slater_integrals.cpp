#include "h2pt/slater_integrals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "h2pt/errors.hpp"
#include "h2pt/quadrature.hpp"

namespace h2pt {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

// E1(x) for x > 0. std::expint is Ei, and Ei(-x) = -E1(x).
double exponential_integral_e1(double x) { return -std::expint(-x); }

}  // namespace

void OrbitalGeometry::validate() const {
  if (!std::isfinite(R) || !std::isfinite(alpha)) {
    throw InputError("orbital geometry must be finite (R=" + std::to_string(R) +
                     ", alpha=" + std::to_string(alpha) + ")");
  }
  if (R <= 0.0 || alpha <= 0.0) {
    throw InputError("orbital geometry requires R > 0 and alpha > 0 (R=" + std::to_string(R) +
                     ", alpha=" + std::to_string(alpha) + ")");
  }
}

double overlap(const OrbitalGeometry& geom) {
  geom.validate();
  const double r = geom.rho();
  return std::exp(-r) * (1.0 + r + r * r / 3.0);
}

WannierCoefficients wannier_coefficients(double S) {
  if (!std::isfinite(S) || S < 0.0) throw InputError("overlap must be finite and non-negative");
  if (S >= 1.0) throw InputError("degenerate basis: overlap S >= 1 leaves no orthogonal Wannier pair");
  const double one_minus = 1.0 - S * S;
  const double root = std::sqrt(one_minus);
  return {std::sqrt((1.0 + root) / one_minus) / std::numbers::sqrt2, S / (1.0 + root)};
}

AtomicIntegrals atomic_integrals(const OrbitalGeometry& geom) {
  geom.validate();
  const double R = geom.R;
  const double al = geom.alpha;
  const double r = geom.rho();
  const double e1 = std::exp(-r);
  const double e2 = std::exp(-2.0 * r);

  // Hartree-unit pieces, scaled to Rydberg at the end.
  const double S = e1 * (1.0 + r + r * r / 3.0);
  const double S_prime = std::exp(r) * (1.0 - r + r * r / 3.0);
  const double attraction_far = (-std::expm1(-2.0 * r) - r * e2) / R;  // <a|1/r_b|a>
  const double attraction_hybrid = al * (1.0 + r) * e1;                // <a|1/r_a|b>

  const double h_aa = 0.5 * al * al - al - attraction_far;
  const double h_ab = -0.5 * al * al * S + al * attraction_hybrid - 2.0 * attraction_hybrid;

  const double onsite = 5.0 * al / 8.0;
  const double intersite =
      (1.0 - e2 * (1.0 + 11.0 * r / 8.0 + 0.75 * r * r + r * r * r / 6.0)) / R;
  const double hybrid = al * (e1 * (r + 0.125 + 5.0 / (16.0 * r)) -
                              std::exp(-3.0 * r) * (0.125 + 5.0 / (16.0 * r)));
  const double exchange =
      al / 5.0 *
      (-e2 * (-25.0 / 8.0 + 23.0 * r / 4.0 + 3.0 * r * r + r * r * r / 3.0) +
       6.0 / r *
           (S * S * (kEulerGamma + std::log(r)) -
            S_prime * S_prime * exponential_integral_e1(4.0 * r) +
            2.0 * S * S_prime * exponential_integral_e1(2.0 * r)));

  return {S, 2.0 * h_aa, 2.0 * h_ab, 2.0 * onsite, 2.0 * intersite, 2.0 * exchange, 2.0 * hybrid};
}

HubbardParams to_wannier(const AtomicIntegrals& ai) {
  const auto [a, b] = wannier_coefficients(ai.S);
  // Phi_1 = a(phi_a - b phi_b), Phi_2 = a(phi_b - b phi_a)
  const double C[2][2] = {{a, -a * b}, {-a * b, a}};
  const double h[2][2] = {{ai.h_aa, ai.h_ab}, {ai.h_ab, ai.h_aa}};

  auto atomic_eri = [&](int i, int j, int k, int l) {
    if (i == j && k == l) return i == k ? ai.coulomb_onsite : ai.coulomb_intersite;
    if (i != j && k != l) return ai.exchange;
    return ai.hybrid;
  };
  auto wannier_eri = [&](int p, int q, int r, int s) {
    double sum = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
          for (int l = 0; l < 2; ++l)
            sum += C[p][i] * C[q][j] * C[r][k] * C[s][l] * atomic_eri(i, j, k, l);
    return sum;
  };
  auto one_body = [&](int p, int q) {
    double sum = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) sum += C[p][i] * h[i][j] * C[q][j];
    return sum;
  };

  HubbardParams out;
  out.eps = one_body(0, 0);
  out.t = one_body(0, 1);
  out.U = wannier_eri(0, 0, 0, 0);
  out.K = wannier_eri(0, 0, 1, 1);
  out.J = wannier_eri(0, 1, 0, 1);
  out.V = wannier_eri(0, 0, 0, 1);
  out.S = ai.S;
  return out;
}

HubbardParams hubbard_params(const OrbitalGeometry& geom) { return to_wannier(atomic_integrals(geom)); }

// ---------------------------------------------------------------------------

std::string_view to_string(Integrand id) {
  switch (id) {
    case Integrand::S: return "S";
    case Integrand::eps: return "eps";
    case Integrand::t: return "t";
    case Integrand::U: return "U";
    case Integrand::K: return "K";
    case Integrand::J: return "J";
    case Integrand::V: return "V";
  }
  return "?";
}

std::optional<Integrand> integrand_from_string(std::string_view name) {
  for (Integrand id : kAllIntegrands)
    if (to_string(id) == name) return id;
  return std::nullopt;
}

namespace {

// Prolate-spheroidal frame: r_a = c(xi + eta), r_b = c(xi - eta), c = R/2,
// dV = c^3 (xi^2 - eta^2) dxi deta dphi. Every integrand here is axially
// symmetric, so the phi integral contributes 2 pi.
class SpheroidalFrame {
 public:
  explicit SpheroidalFrame(const OrbitalGeometry& g)
      : alpha_(g.alpha), c_(0.5 * g.R), rho_(g.rho()),
        norm_(std::sqrt(g.alpha * g.alpha * g.alpha / std::numbers::pi)) {
    // exp(-rho (xi - 1)) times polynomial growth stays below 1e-16 of the peak.
    xi_max_ = 1.0 + 50.0 / rho_;
  }

  double xi_max() const { return xi_max_; }
  double c() const { return c_; }
  double rho() const { return rho_; }
  double alpha() const { return alpha_; }
  double norm() const { return norm_; }

  double ra(double xi, double eta) const { return c_ * (xi + eta); }
  double rb(double xi, double eta) const { return c_ * (xi - eta); }
  double volume(double xi, double eta) const {
    return 2.0 * std::numbers::pi * c_ * c_ * c_ * (xi * xi - eta * eta);
  }
  double phi(double r) const { return norm_ * std::exp(-alpha_ * r); }

  // Rydberg potential 2 * int |phi(r')|^2 / |r - r'| of one normalised 1s density.
  double site_potential(double r) const {
    const double x = 2.0 * alpha_ * r;
    return 2.0 * (-std::expm1(-x) / r - alpha_ * std::exp(-x));
  }

 private:
  double alpha_, c_, rho_, norm_, xi_max_;
};

const quad::Tolerance kOracleTol{1e-15, 1e-13, 20000};

template <class Density>
quad::Result volume_integral(const SpheroidalFrame& f, Density&& density) {
  return quad::integrate_2d(
      [&](double xi, double eta) { return density(xi, eta) * f.volume(xi, eta); }, 1.0,
      f.xi_max(), -1.0, 1.0, kOracleTol);
}

double legendre_p(int l, double x) { return l == 0 ? 1.0 : 0.5 * (3.0 * x * x - 1.0); }

// Second-kind Legendre functions for x > 1, l in {0, 2}.
double legendre_q(int l, double x) {
  if (l == 0) return std::atanh(1.0 / x);
  if (x < 4.0) return legendre_p(2, x) * std::atanh(1.0 / x) - 1.5 * x;
  // Q_2(x) = (2/15) x^-3 2F1(3/2, 2; 7/2; x^-2); the closed form cancels here.
  const double z = 1.0 / (x * x);
  double term = 1.0, sum = 1.0;
  for (int k = 0; k < 60 && std::abs(term) > 1e-18; ++k) {
    term *= (1.5 + k) * (2.0 + k) / ((3.5 + k) * (k + 1.0)) * z;
    sum += term;
  }
  return 2.0 / 15.0 * sum / (x * x * x);
}

// (ab|ab) in Rydberg through the Neumann expansion of 1/r12. The exchange
// density is exp(-rho xi) alone, so only l = 0 and l = 2 survive the eta
// integrals.
quad::Result exchange_density_self_energy(const SpheroidalFrame& f) {
  const double rho = f.rho();
  // Shapes carry exp(-rho (xi - 1)) so the integrals are O(1) and the
  // absolute tolerance acts as a relative one; the scale returns at the end.
  const double scale = f.norm() * f.norm() * f.norm() * f.norm() * std::exp(-2.0 * rho);
  quad::Result total;
  for (int l : {0, 2}) {
    auto shape = [&](double xi) {
      const double angular = (l == 0) ? 2.0 * xi * xi - 2.0 / 3.0 : -4.0 / 15.0;
      return std::exp(-rho * (xi - 1.0)) * angular;
    };
    quad::Tolerance inner_tol = kOracleTol;
    inner_tol.abs *= 1e-2;
    std::vector<std::pair<double, double>> inner_errors;
    // Symmetric in (xi1, xi2): twice the xi2 < xi1 half.
    auto outer = [&](double xi1) {
      quad::Result inner = quad::integrate(
          [&](double xi2) { return shape(xi2) * legendre_p(l, xi2); }, 1.0, xi1, inner_tol);
      const double weight = 2.0 * shape(xi1) * legendre_q(l, xi1);
      inner_errors.emplace_back(xi1, std::abs(weight) * inner.error);
      return weight * inner.value;
    };
    quad::Result r = quad::integrate(outer, 1.0, f.xi_max(), kOracleTol);
    std::sort(inner_errors.begin(), inner_errors.end());
    double inner_err = 0.0;
    for (std::size_t i = 1; i < inner_errors.size(); ++i) {
      inner_err += 0.5 * (inner_errors[i].second + inner_errors[i - 1].second) *
                   (inner_errors[i].first - inner_errors[i - 1].first);
    }
    const double prefactor = (2.0 * l + 1.0) * 4.0 * std::numbers::pi * std::numbers::pi *
                             std::pow(f.c(), 5) * scale * 2.0;  // 2: Rydberg
    total.value += prefactor * r.value;
    total.error += std::abs(prefactor) * (r.error + inner_err);
  }
  return total;
}

struct Weighted {
  double value = 0.0;
  double error = 0.0;
  void add(double coefficient, const quad::Result& r) {
    value += coefficient * r.value;
    error += std::abs(coefficient) * r.error;
  }
  void add(double coefficient, const Weighted& w) {
    value += coefficient * w.value;
    error += std::abs(coefficient) * w.error;
  }
};

}  // namespace

OracleValue wannier_overlap_oracle(int i, int j, const OrbitalGeometry& geom) {
  geom.validate();
  if (i < 1 || i > 2 || j < 1 || j > 2) throw InputError("Wannier index must be 1 or 2");
  const SpheroidalFrame f(geom);
  const quad::Result s = volume_integral(
      f, [&](double xi, double eta) { return f.phi(f.ra(xi, eta)) * f.phi(f.rb(xi, eta)); });
  const auto [a, b] = wannier_coefficients(s.value);
  auto wannier = [&](int site, double xi, double eta) {
    const double pa = f.phi(f.ra(xi, eta));
    const double pb = f.phi(f.rb(xi, eta));
    return site == 1 ? a * (pa - b * pb) : a * (pb - b * pa);
  };
  const quad::Result r = volume_integral(
      f, [&](double xi, double eta) { return wannier(i, xi, eta) * wannier(j, xi, eta); });
  return {r.value, r.error + s.error};
}

OracleValue quadrature_oracle(Integrand id, const OrbitalGeometry& geom, double target_error) {
  geom.validate();
  const SpheroidalFrame f(geom);
  const double al = f.alpha();

  auto pa = [&](double xi, double eta) { return f.phi(f.ra(xi, eta)); };
  auto pb = [&](double xi, double eta) { return f.phi(f.rb(xi, eta)); };

  const quad::Result s = volume_integral(f, [&](double xi, double eta) { return pa(xi, eta) * pb(xi, eta); });

  Weighted out;
  if (id == Integrand::S) {
    out.add(1.0, s);
  } else {
    const auto [a, b] = wannier_coefficients(s.value);
    auto w1 = [&](double xi, double eta) { return a * (pa(xi, eta) - b * pb(xi, eta)); };
    auto w2 = [&](double xi, double eta) { return a * (pb(xi, eta) - b * pa(xi, eta)); };

    if (id == Integrand::eps || id == Integrand::t) {
      // h phi_a = (-alpha^2 + (2 alpha - 2)/r_a - 2/r_b) phi_a, likewise for b.
      auto h_w1 = [&](double xi, double eta) {
        const double ra = f.ra(xi, eta), rb = f.rb(xi, eta);
        const double h_on_a = -al * al + (2.0 * al - 2.0) / ra - 2.0 / rb;
        const double h_on_b = -al * al + (2.0 * al - 2.0) / rb - 2.0 / ra;
        return a * (h_on_a * pa(xi, eta) - b * h_on_b * pb(xi, eta));
      };
      if (id == Integrand::eps) {
        out.add(1.0, volume_integral(f, [&](double xi, double eta) { return w1(xi, eta) * h_w1(xi, eta); }));
      } else {
        out.add(1.0, volume_integral(f, [&](double xi, double eta) { return w2(xi, eta) * h_w1(xi, eta); }));
      }
    } else {
      auto with_site = [&](auto&& density, int site) {
        return volume_integral(f, [&](double xi, double eta) {
          const double r = site == 1 ? f.ra(xi, eta) : f.rb(xi, eta);
          return density(xi, eta) * f.site_potential(r);
        });
      };
      auto d11 = [&](double xi, double eta) { const double w = w1(xi, eta); return w * w; };
      auto d12 = [&](double xi, double eta) { return w1(xi, eta) * w2(xi, eta); };
      auto dab = [&](double xi, double eta) { return pa(xi, eta) * pb(xi, eta); };

      const quad::Result ab_aa = with_site(dab, 1);
      const quad::Result ab_bb = with_site(dab, 2);
      const quad::Result ab_ab = exchange_density_self_energy(f);

      const double a2 = a * a;
      if (id == Integrand::U || id == Integrand::K || id == Integrand::V) {
        const quad::Result d11_aa = with_site(d11, 1);
        const quad::Result d11_bb = with_site(d11, 2);
        Weighted d11_ab;
        d11_ab.add(a2, ab_aa);
        d11_ab.add(-2.0 * a2 * b, ab_ab);
        d11_ab.add(a2 * b * b, ab_bb);
        if (id == Integrand::U) {
          out.add(a2, d11_aa);
          out.add(-2.0 * a2 * b, d11_ab);
          out.add(a2 * b * b, d11_bb);
        } else if (id == Integrand::K) {
          out.add(a2, d11_bb);
          out.add(-2.0 * a2 * b, d11_ab);
          out.add(a2 * b * b, d11_aa);
        } else {
          out.add(a2 * (1.0 + b * b), d11_ab);
          out.add(-a2 * b, d11_aa);
          out.add(-a2 * b, d11_bb);
        }
      } else {  // J
        const quad::Result d12_aa = with_site(d12, 1);
        const quad::Result d12_bb = with_site(d12, 2);
        Weighted d12_ab;
        d12_ab.add(a2 * (1.0 + b * b), ab_ab);
        d12_ab.add(-a2 * b, ab_aa);
        d12_ab.add(-a2 * b, ab_bb);
        out.add(a2 * (1.0 + b * b), d12_ab);
        out.add(-a2 * b, d12_aa);
        out.add(-a2 * b, d12_bb);
      }
    }
    // The Wannier coefficients inherit the overlap's quadrature error.
    out.error += s.error * std::abs(out.value) * 4.0;
  }

  if (!(out.error <= target_error)) {
    throw NumericalError("quadrature oracle for " + std::string(to_string(id)) +
                             " missed its error target",
                         out.value, out.error);
  }
  return {out.value, out.error};
}

}  // namespace h2pt
