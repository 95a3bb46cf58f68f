#pragma once

// Variational ground state of the dimer: alpha is optimised at each R (inner
// problem), then R is optimised (outer problem). E_T = 2/R + E4, Rydberg.

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "h2pt/dimer_hamiltonian.hpp"
#include "h2pt/slater_integrals.hpp"

namespace h2pt {

/// Energy of two isolated hydrogen atoms, the dissociation reference.
inline constexpr double kAtomicLimit = -2.0;

struct SolverOptions {
  double r_min = 0.3;       // R search window, a0
  double r_max = 20.0;
  double alpha_min = 0.3;   // alpha window, 1/a0
  double alpha_max = 3.0;
  double scan_step = 0.05;  // coarse R scan for bond minima
  double molecular_edge = 4.0;  // bond minima are sought in [r_min, molecular_edge]
  double derivative_step = 1e-4;
};

enum class Stability { Stable, Metastable, Unbound };
std::string_view to_string(Stability s);

struct AlphaOptimum {
  double alpha = 0.0;
  double energy = 0.0;  // E_T4 at the optimum, Ry
};

struct EquilibriumPoint {
  double gamma = 0.0;
  double R0 = 0.0;
  double alpha0 = 0.0;
  double E_total = 0.0;
  double E_diss = 0.0;
  Stability stability = Stability::Unbound;
  bool bound() const { return stability != Stability::Unbound; }
};

/// 2/R + E4 at fixed (R, alpha).
double total_energy(double R, double alpha, double gamma);

/// Inner problem. Throws NumericalError (message lists the bracket and its
/// endpoint energies) if the optimum sits on the alpha window edge.
AlphaOptimum optimize_alpha(double R, double gamma, const SolverOptions& opt = {});

/// Outer problem. An Unbound result is a value, not an error.
EquilibriumPoint equilibrium(double gamma, const SolverOptions& opt = {});

/// Brent refinement of the alpha-optimised energy inside [lo, hi]; used by
/// equilibrium() and exposed for restart checks.
EquilibriumPoint refine_equilibrium(double gamma, double lo, double hi, const SolverOptions& opt = {});

/// Equilibria for several gamma values, computed in parallel, input order kept.
std::vector<EquilibriumPoint> sweep(const std::vector<double>& gammas, const SolverOptions& opt = {});

/// Smallest gamma whose equilibrium spectrum is PT-broken (bisection, 1e-6).
double find_gamma_pt(const SolverOptions& opt = {});
/// Root of E_diss(gamma) (bisection, 1e-6).
double find_gamma_ms(const SolverOptions& opt = {});
/// Largest gamma with a local minimum in R (bisection, 1e-5).
double find_gamma_d(const SolverOptions& opt = {});

struct CurveSample {
  double R = 0.0;
  double alpha = 0.0;
  std::array<cplx, 6> E_total{};  // 2/R + E_j
  HubbardParams params;
};

struct EnergyCurve {
  double gamma = 0.0;
  std::vector<CurveSample> samples;
};

/// Per-R alpha optimisation on a strictly increasing positive grid.
EnergyCurve energy_curve(double gamma, const std::vector<double>& R_grid, const SolverOptions& opt = {});

/// Uniform grid helper: steps+1 points from lo to hi inclusive.
std::vector<double> linear_grid(double lo, double hi, int steps);

// ---------------------------------------------------------------------------
// Charge density rho(r) = |Phi_1(r)|^2 + |Phi_2(r)|^2 with the protons on the
// z axis at +-R/2.

enum class DensityPlane { xy, xz, yz, volume };

struct GridSpec {
  DensityPlane plane = DensityPlane::xz;
  int n = 201;               // points per axis
  double half_width = 4.0;   // grid spans [-half_width, half_width] per axis, a0
};

struct DensityGrid {
  GridSpec spec;
  OrbitalGeometry geom;
  std::vector<double> axis;    // coordinates along each axis
  std::vector<double> values;  // row-major; plane: [i][j], volume: [i][j][k]
  double spacing() const { return axis.size() > 1 ? axis[1] - axis[0] : 0.0; }
  double peak() const;
  /// Riemann sum over the grid (volume grids only), a0^-3 * a0^3.
  double integral() const;
};

double density_at(const OrbitalGeometry& geom, double x, double y, double z);
DensityGrid density_grid(const OrbitalGeometry& geom, const GridSpec& spec);

}  // namespace h2pt
