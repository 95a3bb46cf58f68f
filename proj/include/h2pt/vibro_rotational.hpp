#pragma once

// Nuclear motion on the alpha-optimised ground curve: harmonic and Morse
// fits, vibrational and rotational ladders, and electron-phonon couplings
// g_x = dx/dR. Energies in Rydberg, lengths in a0, masses in electron masses.

#include <vector>

#include "h2pt/variational_solver.hpp"

namespace h2pt {

/// Reduced proton mass m' = m_p / 2.
inline constexpr double kReducedMass = 918.076336;

struct HarmonicFit {
  double k_H = 0.0;      // Ry/a0^2
  double omega_H = 0.0;  // Ry
};

struct MorseFit {
  double E_D = 0.0;       // Ry, fixed to the dissociation energy
  double alpha_Mo = 0.0;  // 1/a0
  double k_Mo = 0.0;      // 2 E_D alpha_Mo^2
  double omega_Mo = 0.0;
  double rms_residual = 0.0;
  int points = 0;
};

struct PhononFit {
  HarmonicFit harmonic;
  bool has_morse = false;
  MorseFit morse;
  double reduced_mass = kReducedMass;
};

/// k_H from the 5-point second difference of the alpha-optimised E_T at R0,
/// omega_H = sqrt(k_H / m'). Throws NumericalError if the curvature is not
/// positive, InputError if eq is unbound.
HarmonicFit harmonic_fit(const EquilibriumPoint& eq, double h = 1e-3, const SolverOptions& opt = {});

struct MorseWindow {
  double below = 0.5;  // fit on [R0 - below, R0 + above]
  double above = 2.5;
  int points = 61;
};

/// Least-squares alpha_Mo with E_D fixed, against the alpha-optimised curve.
/// Refused (InputError) once E_diss <= 0, i.e. for gamma >= gamma_MS.
MorseFit morse_fit(const EquilibriumPoint& eq, const MorseWindow& window = {}, const SolverOptions& opt = {});
/// Same fit against precomputed samples.
MorseFit morse_fit(const EnergyCurve& curve, const EquilibriumPoint& eq);

PhononFit phonon_fit(const EquilibriumPoint& eq, const SolverOptions& opt = {});

struct VibrationalLevel {
  int n = 0;
  double E_H = 0.0;
  double E_Mo = 0.0;
};

/// E_H = omega_H (n + 1/2); E_Mo = omega_Mo (n + 1/2) + omega_Mo^2 / (4 E_D) (n + 1/2)^2.
/// E_Mo is NaN when the fit has no Morse part.
std::vector<VibrationalLevel> vibrational_levels(const PhononFit& fit, int n_max);

/// B0 = 1 / (m' R0^2).
double rotational_constant(const EquilibriumPoint& eq);
/// E_r = B0 l (l + 1) for l = 0..l_max.
std::vector<double> rotational_levels(double B0, int l_max);

struct CouplingSet {
  double g_eps = 0.0, g_t = 0.0, g_U = 0.0, g_K = 0.0, g_J = 0.0, g_V = 0.0;  // Ry/a0
};

enum class CouplingMode {
  FrozenAlpha,  // partial derivative at alpha = alpha0
  AlongPath,    // total derivative along alpha_opt(R)
};

/// Central difference of each integral at R0 with step h.
CouplingSet eph_couplings(const EquilibriumPoint& eq, CouplingMode mode = CouplingMode::FrozenAlpha,
                          double h = 1e-3, const SolverOptions& opt = {});

/// Published k_H / omega_H reference rows. Only the rows marked `bold`
/// satisfy omega = sqrt(k/m'); the others are kept so tools can flag them.
struct ReferenceHarmonicRow {
  double gamma;
  double k_H;
  double omega_H;
  bool bold;
};
const std::vector<ReferenceHarmonicRow>& reference_harmonic_rows();
double omega_consistency(double k_H, double omega_H);  // |omega - sqrt(k/m')| / omega

}  // namespace h2pt
