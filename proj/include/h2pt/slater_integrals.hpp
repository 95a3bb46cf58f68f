#pragma once

// Two-centre integrals over 1s Slater orbitals and the six Hubbard
// parameters of the site-orthogonalised (Wannier) basis.
//
// Units: energies in Rydberg, lengths in Bohr radii. The one-electron
// operator is -nabla^2 - 2/|r - R_1| - 2/|r - R_2|; electrons interact
// through 2/|r_1 - r_2|.

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace h2pt {

/// Inter-proton distance R and inverse orbital size alpha of the 1s basis.
struct OrbitalGeometry {
  double R = 0.0;
  double alpha = 0.0;

  /// Throws InputError unless both values are finite and positive.
  void validate() const;
  double rho() const { return alpha * R; }
};

struct HubbardParams {
  double eps = 0.0;
  double t = 0.0;
  double U = 0.0;
  double K = 0.0;
  double J = 0.0;
  double V = 0.0;
  double S = 0.0;  // atomic overlap, dimensionless
};

/// Atomic-orbital integrals in Rydberg. Two-electron entries use chemists'
/// notation (ij|kl) with orbitals a and b on protons 1 and 2.
struct AtomicIntegrals {
  double S = 0.0;
  double h_aa = 0.0;  // <a|h|a>
  double h_ab = 0.0;  // <a|h|b>
  double coulomb_onsite = 0.0;    // (aa|aa)
  double coulomb_intersite = 0.0; // (aa|bb)
  double exchange = 0.0;          // (ab|ab)
  double hybrid = 0.0;            // (aa|ab)
};

struct WannierCoefficients {
  double a = 1.0;
  double b = 0.0;
};

/// S = exp(-rho)(1 + rho + rho^2/3), rho = alpha R.
double overlap(const OrbitalGeometry& geom);

/// Normalisation of Phi_j = a(phi_j - b phi_l). Throws InputError for S >= 1
/// (the two orbitals coincide and the basis degenerates) or S < 0.
WannierCoefficients wannier_coefficients(double S);

/// Closed-form atomic integrals.
AtomicIntegrals atomic_integrals(const OrbitalGeometry& geom);

/// Transforms atomic integrals into the Wannier basis.
HubbardParams to_wannier(const AtomicIntegrals& atomic);

/// The six Hubbard parameters plus S at the given geometry.
HubbardParams hubbard_params(const OrbitalGeometry& geom);

// ---------------------------------------------------------------------------
// Independent quadrature route

enum class Integrand { S, eps, t, U, K, J, V };

inline constexpr std::array<Integrand, 7> kAllIntegrands = {
    Integrand::S, Integrand::eps, Integrand::t, Integrand::U,
    Integrand::K, Integrand::J,   Integrand::V};

std::string_view to_string(Integrand id);
std::optional<Integrand> integrand_from_string(std::string_view name);

struct OracleValue {
  double value = 0.0;
  double error = 0.0;  // estimated absolute error
};

/// Evaluates one integral by adaptive quadrature in prolate-spheroidal
/// coordinates. Throws NumericalError (with the best value and estimate)
/// when the estimate exceeds `target_error`.
OracleValue quadrature_oracle(Integrand id, const OrbitalGeometry& geom,
                              double target_error = 1e-8);

/// <Phi_i|Phi_j> by quadrature, for the orthonormality check.
OracleValue wannier_overlap_oracle(int i, int j, const OrbitalGeometry& geom);

}  // namespace h2pt
