#include "h2pt/variational_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "h2pt/errors.hpp"
#include "h2pt/minimize.hpp"
#include "h2pt/parallel.hpp"

namespace h2pt {

namespace {

void check_gamma(double gamma) {
  if (!std::isfinite(gamma) || gamma < 0.0) throw InputError("gamma must be finite and >= 0");
}

// Alpha-optimised energy without the window-edge check; the coarse R scan
// only needs a continuous function, and clamped values far from the minimum
// never decide anything.
double relaxed_energy(double R, double gamma, const SolverOptions& opt) {
  return brent_minimize([&](double a) { return total_energy(R, a, gamma); }, opt.alpha_min, opt.alpha_max).f;
}

// Bond minima are searched on [r_min, molecular_edge]. Past a few a0 the
// alpha-optimised curve is flat to 1e-7 Ry and, for large gamma, carries a
// long-range ripple of depth ~1e-8 Ry near R = 11; that is not a molecule.
std::vector<double> scan_grid(const SolverOptions& opt) {
  std::vector<double> grid;
  const double edge = std::min(opt.molecular_edge, opt.r_max);
  const int n = static_cast<int>(std::ceil((edge - opt.r_min) / opt.scan_step));
  for (int i = 0; i <= n; ++i) grid.push_back(opt.r_min + (edge - opt.r_min) * i / n);
  return grid;
}

}  // namespace

std::string_view to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Metastable: return "metastable";
    case Stability::Unbound: return "unbound";
  }
  return "?";
}

double total_energy(double R, double alpha, double gamma) {
  return 2.0 / R + ground_energy(hubbard_params({R, alpha}), gamma);
}

AlphaOptimum optimize_alpha(double R, double gamma, const SolverOptions& opt) {
  OrbitalGeometry{R, 1.0}.validate();
  check_gamma(gamma);
  auto f = [&](double a) { return total_energy(R, a, gamma); };
  const ScalarMinimum m = brent_minimize(f, opt.alpha_min, opt.alpha_max);
  const double edge = 1e-4 * (opt.alpha_max - opt.alpha_min);
  if (m.x - opt.alpha_min < edge || opt.alpha_max - m.x < edge) {
    std::ostringstream msg;
    msg << "no interior alpha minimum at R=" << R << ", gamma=" << gamma << ": bracket [" << opt.alpha_min
        << ", " << opt.alpha_max << "], E_T(lo)=" << f(opt.alpha_min) << ", E_T(hi)=" << f(opt.alpha_max);
    throw NumericalError(msg.str(), m.f);
  }
  return {m.x, m.f};
}

EquilibriumPoint refine_equilibrium(double gamma, double lo, double hi, const SolverOptions& opt) {
  check_gamma(gamma);
  const ScalarMinimum m = brent_minimize([&](double R) { return relaxed_energy(R, gamma, opt); }, lo, hi);
  const AlphaOptimum a = optimize_alpha(m.x, gamma, opt);
  EquilibriumPoint eq;
  eq.gamma = gamma;
  eq.R0 = m.x;
  eq.alpha0 = a.alpha;
  eq.E_total = a.energy;
  eq.E_diss = kAtomicLimit - a.energy;
  eq.stability = eq.E_diss > 0.0 ? Stability::Stable : Stability::Metastable;
  return eq;
}

EquilibriumPoint equilibrium(double gamma, const SolverOptions& opt) {
  check_gamma(gamma);
  const std::vector<double> R = scan_grid(opt);
  std::vector<double> E(R.size());
  for (std::size_t i = 0; i < R.size(); ++i) E[i] = relaxed_energy(R[i], gamma, opt);

  for (std::size_t i = 1; i + 1 < R.size(); ++i) {
    if (E[i] < E[i - 1] && E[i] <= E[i + 1]) return refine_equilibrium(gamma, R[i - 1], R[i + 1], opt);
  }

  // No grid minimum. A shallow minimum narrower than the grid still shows up
  // as a local maximum of the slope; if that maximum is positive, a minimum
  // sits to its left.
  const double h = opt.derivative_step;
  auto slope = [&](double r) {
    return (relaxed_energy(r + h, gamma, opt) - relaxed_energy(r - h, gamma, opt)) / (2.0 * h);
  };
  std::vector<double> mid, s;
  for (std::size_t i = 0; i + 1 < R.size(); ++i) {
    mid.push_back(0.5 * (R[i] + R[i + 1]));
    s.push_back((E[i + 1] - E[i]) / (R[i + 1] - R[i]));
  }
  for (std::size_t k = 1; k + 1 < s.size(); ++k) {
    if (!(s[k] >= s[k - 1] && s[k] >= s[k + 1])) continue;
    const ScalarMinimum peak = brent_minimize([&](double r) { return -slope(r); }, mid[k - 1], mid[k + 1]);
    if (-peak.f > 0.0) return refine_equilibrium(gamma, mid[k - 1], peak.x, opt);
  }

  EquilibriumPoint eq;
  eq.gamma = gamma;
  eq.R0 = eq.alpha0 = eq.E_total = std::numeric_limits<double>::quiet_NaN();
  eq.E_diss = std::numeric_limits<double>::quiet_NaN();
  eq.stability = Stability::Unbound;
  return eq;
}

std::vector<EquilibriumPoint> sweep(const std::vector<double>& gammas, const SolverOptions& opt) {
  for (double g : gammas) check_gamma(g);
  return parallel_map(gammas.size(), [&](std::size_t i) { return equilibrium(gammas[i], opt); });
}

double find_gamma_pt(const SolverOptions& opt) {
  auto broken = [&](double g) {
    const EquilibriumPoint eq = equilibrium(g, opt);
    if (!eq.bound()) throw NumericalError("no equilibrium while searching gamma_PT", g);
    return pt_phase(hubbard_params({eq.R0, eq.alpha0}), g);
  };
  return bisect_predicate(broken, 0.0, 1.0, 1e-6, "gamma_PT").mid();
}

double find_gamma_ms(const SolverOptions& opt) {
  auto above = [&](double g) {
    const EquilibriumPoint eq = equilibrium(g, opt);
    if (!eq.bound()) throw NumericalError("no equilibrium while searching gamma_MS", g);
    return eq.E_diss < 0.0;
  };
  return bisect_predicate(above, 0.0, 1.0, 1e-6, "gamma_MS").mid();
}

double find_gamma_d(const SolverOptions& opt) {
  auto unbound = [&](double g) { return !equilibrium(g, opt).bound(); };
  // The bound side of the bracket, so an equilibrium exists at the result.
  return bisect_predicate(unbound, 0.9, 1.5, 1e-5, "gamma_D").lo;
}

std::vector<double> linear_grid(double lo, double hi, int steps) {
  if (steps < 1 || !(hi > lo)) throw InputError("grid needs hi > lo and at least one step");
  std::vector<double> g(steps + 1);
  for (int i = 0; i <= steps; ++i) g[i] = lo + (hi - lo) * i / steps;
  return g;
}

EnergyCurve energy_curve(double gamma, const std::vector<double>& R_grid, const SolverOptions& opt) {
  check_gamma(gamma);
  if (R_grid.empty()) throw InputError("empty R grid");
  for (std::size_t i = 0; i < R_grid.size(); ++i) {
    if (!(R_grid[i] > 0.0) || (i > 0 && !(R_grid[i] > R_grid[i - 1])))
      throw InputError("R grid must be positive and strictly increasing");
  }
  EnergyCurve curve;
  curve.gamma = gamma;
  curve.samples = parallel_map(R_grid.size(), [&](std::size_t i) {
    CurveSample s;
    s.R = R_grid[i];
    s.alpha = optimize_alpha(s.R, gamma, opt).alpha;
    s.params = hubbard_params({s.R, s.alpha});
    const DimerSpectrum spec = spectrum_numeric(s.params, gamma);
    for (int j = 0; j < 6; ++j) s.E_total[j] = 2.0 / s.R + spec.energies[j];
    return s;
  });
  return curve;
}

// ---------------------------------------------------------------------------

double density_at(const OrbitalGeometry& geom, double x, double y, double z) {
  const auto [a, b] = wannier_coefficients(overlap(geom));
  const double norm = std::sqrt(geom.alpha * geom.alpha * geom.alpha / std::numbers::pi);
  const double half = 0.5 * geom.R;
  const double ra = std::sqrt(x * x + y * y + (z + half) * (z + half));
  const double rb = std::sqrt(x * x + y * y + (z - half) * (z - half));
  const double pa = norm * std::exp(-geom.alpha * ra);
  const double pb = norm * std::exp(-geom.alpha * rb);
  const double w1 = a * (pa - b * pb);
  const double w2 = a * (pb - b * pa);
  return w1 * w1 + w2 * w2;
}

double DensityGrid::peak() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

double DensityGrid::integral() const {
  if (spec.plane != DensityPlane::volume) throw InputError("integral() needs a volume grid");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double h = spacing();
  return sum * h * h * h;
}

DensityGrid density_grid(const OrbitalGeometry& geom, const GridSpec& spec) {
  geom.validate();
  if (spec.n < 2 || !(spec.half_width > 0.0)) throw InputError("density grid needs n >= 2 and half_width > 0");
  DensityGrid grid;
  grid.spec = spec;
  grid.geom = geom;
  grid.axis = linear_grid(-spec.half_width, spec.half_width, spec.n - 1);
  const auto& ax = grid.axis;
  const std::size_t n = ax.size();
  if (spec.plane == DensityPlane::volume) {
    grid.values.resize(n * n * n);
    auto slabs = parallel_map(n, [&](std::size_t i) {
      std::vector<double> slab(n * n);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) slab[j * n + k] = density_at(geom, ax[i], ax[j], ax[k]);
      return slab;
    });
    for (std::size_t i = 0; i < n; ++i) std::copy(slabs[i].begin(), slabs[i].end(), grid.values.begin() + i * n * n);
    return grid;
  }
  grid.values.resize(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double x = 0, y = 0, z = 0;
      switch (spec.plane) {
        case DensityPlane::xy: x = ax[i]; y = ax[j]; break;
        case DensityPlane::xz: x = ax[i]; z = ax[j]; break;
        case DensityPlane::yz: y = ax[i]; z = ax[j]; break;
        case DensityPlane::volume: break;
      }
      grid.values[i * n + j] = density_at(geom, x, y, z);
    }
  }
  return grid;
}

}  // namespace h2pt
