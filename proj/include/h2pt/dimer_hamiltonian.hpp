#pragma once

// Two-electron Hubbard dimer with balanced gain and loss (+i gamma on site 1,
// -i gamma on site 2). Basis order of the 6x6 matrix:
//   |1> = c+_1up c+_1dn        |2> = c+_1up c+_2up      |3> = c+_1up c+_2dn
//   |4> = c+_1dn c+_2dn        |5> = c+_2up c+_2dn      |6> = c+_2up c+_1dn
// Energies in Rydberg.

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Core>

#include "h2pt/slater_integrals.hpp"

namespace h2pt {

using cplx = std::complex<double>;
using Matrix6c = Eigen::Matrix<cplx, 6, 6>;

/// |Im E| above this marks the PT-broken phase.
inline constexpr double kPtImagTolerance = 1e-9;

/// Coupling strength of the gain/loss term. Stored non-negative: the spectrum
/// is even in gamma, so a negative input is folded onto |gamma|.
struct GainLossCoupling {
  double gamma = 0.0;
  static GainLossCoupling from(double g);  // throws InputError if non-finite
};

struct DimerSpectrum {
  std::array<cplx, 6> energies{};  // E1..E6
  bool pt_broken = false;
  int ground_index = 3;            // E4
  double a_minus_b = 0.0;          // discriminant under the square root of C

  const cplx& E(int label) const { return energies.at(label - 1); }
  cplx ground() const { return energies[ground_index]; }
  double max_abs_imag() const;
};

Matrix6c build_matrix(const HubbardParams& p, double gamma);

/// Discriminant pieces of the cubic block. A - B > 0 exactly when two of the
/// cubic roots form a complex-conjugate pair.
struct Discriminant {
  double A = 0.0;
  double B = 0.0;
  double a_minus_b() const { return A - B; }
};
Discriminant discriminant(const HubbardParams& p, double gamma);

/// Direct diagonalization of build_matrix, labelled E1..E6:
///   E1, E2: parallel-spin triplet states |2>, |4>
///   E3:     antisymmetric covalent state (|3> - |6>)/sqrt2
///   E4:     lowest root of the remaining 3x3 block (always real)
///   E5, E6: other two roots; upper/middle while real, Im < 0 / Im > 0 once
///           they form a conjugate pair.
/// Throws NumericalError if the eigen-solver fails or returns non-finite values.
DimerSpectrum spectrum_numeric(const HubbardParams& p, double gamma);

struct ClosedFormResult {
  DimerSpectrum spectrum;
  int branch = 0;          // k in c = |C|^(1/3) exp(i(arg C + 2 pi k)/3)
  bool fell_back = false;  // true when no branch matched and numeric values were returned
  double mismatch = 0.0;   // max |closed - numeric| after matching, for the chosen branch
};

/// Printed Cardano-type expressions. The principal cube root is tried first,
/// then the other two branches; if none reproduces the numeric multiset to
/// `match_tol` the numeric spectrum is returned and a warning is logged.
ClosedFormResult spectrum_closed_form(const HubbardParams& p, double gamma, double match_tol = 1e-7);

/// True iff any eigenvalue has |Im E| > kPtImagTolerance.
bool pt_phase(const HubbardParams& p, double gamma);

/// E4 alone (the real ground branch), for use inside optimizers.
double ground_energy(const HubbardParams& p, double gamma);

/// Spectra along an increasing gamma path, each label matched to the nearest
/// value of the previous step. Use this for sweeps where labels must follow
/// branches through crossings.
std::vector<DimerSpectrum> track_spectrum(const HubbardParams& p, const std::vector<double>& gammas);

/// Max distance between two six-element multisets after optimal matching.
double multiset_distance(const std::array<cplx, 6>& a, const std::array<cplx, 6>& b);

}  // namespace h2pt
