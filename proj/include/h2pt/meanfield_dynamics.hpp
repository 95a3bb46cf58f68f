#pragma once

// Mean-field equations of motion for sixteen operator expectations of the
// dimer, with and without the gain/loss term. Time is in units hbar/Ry.
//
// Pair-field conventions: P*_j is taken as J <Delta+_jbar> and |Delta_j|^2 as
// <Delta+_j><Delta_j>. Both coincide with complex conjugation whenever the
// Hermitian pairings hold, and keep the right-hand side a polynomial in the
// state, so the Jacobian is exact under forward-mode differentiation.

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "h2pt/slater_integrals.hpp"
#include "h2pt/variational_solver.hpp"

namespace h2pt {

namespace mf {
// Slots of the state vector.
enum Slot : int {
  n1u, n1d, n2u, n2d,          // <n_{j sigma}>
  n12u, n12d, n21u, n21d,      // <c+_{j sigma} c_{jbar sigma}>
  n1ud, n1du, n2ud, n2du,      // <c+_{j sigma} c_{j -sigma}>
  D1dag, D1, D2dag, D2,        // <Delta+_j>, <Delta_j>, Delta_j = c_{j dn} c_{j up}
  kSize
};
const char* slot_name(int slot);
}  // namespace mf

using MeanFieldState = std::array<cplx, mf::kSize>;

/// Forward-mode dual number over the complex field.
struct Dual {
  cplx v{};
  cplx d{};
  Dual() = default;
  Dual(cplx value, cplx deriv = {}) : v(value), d(deriv) {}
  Dual(double value) : v(value) {}
};
inline Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.v * b.d + a.d * b.v}; }
inline Dual operator+(const Dual& a, cplx b) { return {a.v + b, a.d}; }
inline Dual operator+(cplx a, const Dual& b) { return {a + b.v, b.d}; }
inline Dual operator-(const Dual& a, cplx b) { return {a.v - b, a.d}; }
inline Dual operator-(cplx a, const Dual& b) { return {a - b.v, -b.d}; }
inline Dual operator*(const Dual& a, cplx b) { return {a.v * b, a.d * b}; }
inline Dual operator*(cplx a, const Dual& b) { return {a * b.v, a * b.d}; }
inline Dual operator+(const Dual& a, double b) { return {a.v + b, a.d}; }
inline Dual operator+(double a, const Dual& b) { return {a + b.v, b.d}; }
inline Dual operator-(const Dual& a, double b) { return {a.v - b, a.d}; }
inline Dual operator-(double a, const Dual& b) { return {a - b.v, -b.d}; }
inline Dual operator*(const Dual& a, double b) { return {a.v * b, a.d * b}; }
inline Dual operator*(double a, const Dual& b) { return {a * b.v, a * b.d}; }

template <class T>
using MFVector = std::array<T, mf::kSize>;

/// Self-consistent coefficients of the mean-field Hamiltonian, indexed
/// [site 0/1][spin 0=up/1=down].
template <class T>
struct MeanFieldCoefficients {
  T eps[2][2];
  T t[2][2];
  T J[2][2];
  T P[2];
  T P_star[2];
};

template <class T>
MeanFieldCoefficients<T> coefficients(const MFVector<T>& x, const HubbardParams& p, double gamma);

/// Time derivatives without the gain/loss term (Heisenberg equations).
template <class T>
MFVector<T> rhs_hermitian(const MFVector<T>& x, const HubbardParams& p);

/// Time derivatives of the generalised (non-Hermitian) equations, including
/// the nonlinear normalisation terms.
template <class T>
MFVector<T> rhs_nonhermitian(const MFVector<T>& x, const HubbardParams& p, double gamma);

using Jacobian16 = Eigen::Matrix<cplx, mf::kSize, mf::kSize>;
/// Exact Jacobian d(rhs)/d(state) by forward-mode differentiation.
Jacobian16 jacobian(const MeanFieldState& x, const HubbardParams& p, double gamma, bool hermitian);

/// <H^MF> evaluated on the state.
cplx mean_field_energy(const MeanFieldState& x, const HubbardParams& p, double gamma);
/// Energy functional (<H0> + <H^MF>) / 2, which counts each interaction once.
/// Unlike <H^MF> it is a constant of the Hermitian motion.
cplx energy_functional(const MeanFieldState& x, const HubbardParams& p, double gamma);

struct DynamicsSetup {
  double gamma = 0.0;
  OrbitalGeometry geom;   // geometry whose integrals drive the dynamics
  HubbardParams params;
  MeanFieldState initial{};
};

/// Expectations in the ground eigenvector of the gamma = 0 matrix built at
/// the equilibrium geometry of `gamma` (or of gamma = 0 when
/// `frozen_geometry`). Throws InputError when gamma has no bound equilibrium.
DynamicsSetup initial_state(double gamma, bool frozen_geometry = false, const SolverOptions& opt = {});
/// Same, at an explicit geometry.
MeanFieldState initial_state_at(const HubbardParams& p);

struct IntegrateOptions {
  double t_max = 100.0;
  double output_interval = 0.0;  // 0 -> record every accepted step
  double rtol = 1e-10;
  double atol = 1e-12;
  bool hermitian = false;        // use the gamma-free equations
  double event_resolution = 1e-10;
  double imag_threshold = 1e-6;  // |Im n| above this ends the physical regime
  double occupation_low = -0.05;
  double occupation_high = 1.05;
  bool stop_at_event = true;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<MeanFieldState> states;
  std::optional<double> T_D;
  long steps = 0;
};

/// Occupations outside the physical regime per the options' thresholds.
bool dissociated(const MeanFieldState& x, const IntegrateOptions& opt);

/// Dormand-Prince 5(4) with dense output. T_D is the first time the
/// dissociation condition holds, localised by bisection on the interpolant.
/// Step-size collapse throws NumericalError whose best_value is the last
/// valid time.
Trajectory integrate(const DynamicsSetup& setup, const IntegrateOptions& opt);

struct TdPoint {
  double gamma = 0.0;
  std::optional<double> T_D;
  std::string error;  // non-empty when this point failed
};

/// Independent trajectories per gamma, run in parallel, input order kept.
std::vector<TdPoint> td_sweep(const std::vector<double>& gammas, const IntegrateOptions& opt,
                              bool frozen_geometry = false, const SolverOptions& solver = {});

struct TdFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double rms_log_residual = 0.0;
  int points = 0;
};

/// Linear least squares of log T_D = log a - b log gamma + c gamma over the
/// finite points. Needs at least five; rank deficiency throws NumericalError.
TdFit fit_td(const std::vector<TdPoint>& points);

}  // namespace h2pt
