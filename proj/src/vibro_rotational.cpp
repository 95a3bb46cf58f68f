#include "h2pt/vibro_rotational.hpp"

#include <cmath>
#include <limits>

#include "h2pt/errors.hpp"
#include "h2pt/minimize.hpp"

namespace h2pt {

namespace {

void require_bound(const EquilibriumPoint& eq) {
  if (!eq.bound()) throw InputError("no bound equilibrium at gamma=" + std::to_string(eq.gamma));
}

double path_energy(double R, double gamma, const SolverOptions& opt) {
  return optimize_alpha(R, gamma, opt).energy;
}

struct MorseSamples {
  std::vector<double> R, E;
};

MorseFit fit_alpha(const MorseSamples& s, const EquilibriumPoint& eq) {
  const double ED = eq.E_diss;
  auto residual2 = [&](double a) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s.R.size(); ++i) {
      const double m = 1.0 - std::exp(-a * (s.R[i] - eq.R0));
      const double r = eq.E_total + ED * m * m - s.E[i];
      sum += r * r;
    }
    return sum;
  };
  const ScalarMinimum best = brent_minimize(residual2, 0.05, 10.0);
  MorseFit fit;
  fit.E_D = ED;
  fit.alpha_Mo = best.x;
  fit.k_Mo = 2.0 * ED * best.x * best.x;
  fit.omega_Mo = std::sqrt(fit.k_Mo / kReducedMass);
  fit.points = static_cast<int>(s.R.size());
  fit.rms_residual = std::sqrt(best.f / s.R.size());
  return fit;
}

void refuse_unbound_morse(const EquilibriumPoint& eq) {
  require_bound(eq);
  if (!(eq.E_diss > 0.0)) {
    throw InputError("Morse fit needs a positive dissociation energy; at gamma=" + std::to_string(eq.gamma) +
                     " the minimum lies above the separated atoms (gamma >= gamma_MS)");
  }
}

}  // namespace

HarmonicFit harmonic_fit(const EquilibriumPoint& eq, double h, const SolverOptions& opt) {
  require_bound(eq);
  if (!(h > 0.0)) throw InputError("finite-difference step must be positive");
  auto f = [&](double R) { return path_energy(R, eq.gamma, opt); };
  const double R0 = eq.R0;
  const double k = (-f(R0 + 2 * h) + 16 * f(R0 + h) - 30 * f(R0) + 16 * f(R0 - h) - f(R0 - 2 * h)) / (12 * h * h);
  if (!(k > 0.0)) throw NumericalError("non-positive curvature at the minimum: no bound vibration", k);
  return {k, std::sqrt(k / kReducedMass)};
}

MorseFit morse_fit(const EquilibriumPoint& eq, const MorseWindow& w, const SolverOptions& opt) {
  refuse_unbound_morse(eq);
  if (w.points < 3 || !(w.below >= 0.0) || !(w.above > 0.0)) throw InputError("invalid Morse window");
  const std::vector<double> grid = linear_grid(eq.R0 - w.below, eq.R0 + w.above, w.points - 1);
  return morse_fit(energy_curve(eq.gamma, grid, opt), eq);
}

MorseFit morse_fit(const EnergyCurve& curve, const EquilibriumPoint& eq) {
  refuse_unbound_morse(eq);
  MorseSamples s;
  for (const auto& c : curve.samples) {
    s.R.push_back(c.R);
    s.E.push_back(c.E_total[3].real());
  }
  if (s.R.size() < 3) throw InputError("Morse fit needs at least three samples");
  return fit_alpha(s, eq);
}

PhononFit phonon_fit(const EquilibriumPoint& eq, const SolverOptions& opt) {
  PhononFit fit;
  fit.harmonic = harmonic_fit(eq, 1e-3, opt);
  if (eq.E_diss > 0.0) {
    fit.morse = morse_fit(eq, {}, opt);
    fit.has_morse = true;
  }
  return fit;
}

std::vector<VibrationalLevel> vibrational_levels(const PhononFit& fit, int n_max) {
  if (n_max < 0) throw InputError("n_max must be >= 0");
  std::vector<VibrationalLevel> out;
  for (int n = 0; n <= n_max; ++n) {
    const double x = n + 0.5;
    VibrationalLevel lv{n, fit.harmonic.omega_H * x, std::numeric_limits<double>::quiet_NaN()};
    if (fit.has_morse) {
      const double w = fit.morse.omega_Mo;
      lv.E_Mo = w * x + w * w / (4.0 * fit.morse.E_D) * x * x;
    }
    out.push_back(lv);
  }
  return out;
}

double rotational_constant(const EquilibriumPoint& eq) {
  require_bound(eq);
  return 1.0 / (kReducedMass * eq.R0 * eq.R0);
}

std::vector<double> rotational_levels(double B0, int l_max) {
  if (l_max < 0) throw InputError("l_max must be >= 0");
  std::vector<double> out;
  for (int l = 0; l <= l_max; ++l) out.push_back(B0 * l * (l + 1));
  return out;
}

CouplingSet eph_couplings(const EquilibriumPoint& eq, CouplingMode mode, double h, const SolverOptions& opt) {
  require_bound(eq);
  if (!(h > 0.0)) throw InputError("finite-difference step must be positive");
  auto params_at = [&](double R) {
    const double a = mode == CouplingMode::FrozenAlpha ? eq.alpha0 : optimize_alpha(R, eq.gamma, opt).alpha;
    return hubbard_params({R, a});
  };
  const HubbardParams p = params_at(eq.R0 + h);
  const HubbardParams m = params_at(eq.R0 - h);
  const double s = 1.0 / (2.0 * h);
  return {(p.eps - m.eps) * s, (p.t - m.t) * s, (p.U - m.U) * s,
          (p.K - m.K) * s,     (p.J - m.J) * s, (p.V - m.V) * s};
}

const std::vector<ReferenceHarmonicRow>& reference_harmonic_rows() {
  static const std::vector<ReferenceHarmonicRow> rows = {
      {0.0, 0.691719, 0.027449, true},         {0.1, 0.379254, 0.027886, false},
      {0.2, 0.387102, 0.028463, false},        {0.3, 0.402162, 0.029570, false},
      {0.4, 0.412453, 0.0303274, false},       {0.5, 0.427453, 0.0314304, false},
      {0.520873, 0.919309, 0.031644, true},    {0.6, 0.439769, 0.0323359, false},
      {0.659374, 0.980341, 0.0326775, true},   {0.7, 0.0327805, 0.445815, false},
      {0.8, 0.440037, 0.0323556, false},       {0.9, 0.409835, 0.030135, false},
      {1.0, 0.29284, 0.0215324, false},        {1.024638, 0.0050384, 0.00234265, true},
  };
  return rows;
}

double omega_consistency(double k_H, double omega_H) {
  return std::abs(omega_H - std::sqrt(std::abs(k_H) / kReducedMass)) / std::abs(omega_H);
}

}  // namespace h2pt
