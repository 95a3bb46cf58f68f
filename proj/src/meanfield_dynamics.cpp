#include "h2pt/meanfield_dynamics.hpp"

#include <cmath>
#include <exception>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "h2pt/dimer_hamiltonian.hpp"
#include "h2pt/errors.hpp"
#include "h2pt/parallel.hpp"

namespace h2pt {

namespace mf {
const char* slot_name(int slot) {
  static const char* names[kSize] = {"n1up", "n1dn", "n2up", "n2dn", "n12up", "n12dn", "n21up", "n21dn",
                                     "n1updn", "n1dnup", "n2updn", "n2dnup", "D1dag", "D1", "D2dag", "D2"};
  return (slot >= 0 && slot < kSize) ? names[slot] : "?";
}
}  // namespace mf

namespace {

constexpr cplx I{0.0, 1.0};

// Accessors with j in {0, 1} for sites 1, 2 and s in {0, 1} for up, down.
template <class T> const T& occ(const MFVector<T>& x, int j, int s) { return x[2 * j + s]; }
template <class T> const T& bond(const MFVector<T>& x, int j, int s) { return x[4 + 2 * j + s]; }   // c+_{j s} c_{jbar s}
template <class T> const T& flip(const MFVector<T>& x, int j, int s) { return x[8 + 2 * j + s]; }   // c+_{j s} c_{j -s}
template <class T> const T& pair_dag(const MFVector<T>& x, int j) { return x[12 + 2 * j]; }
template <class T> const T& pair(const MFVector<T>& x, int j) { return x[13 + 2 * j]; }

template <class T>
MFVector<T> times_minus_i(MFVector<T> r) {
  for (auto& v : r) v = v * cplx(0.0, -1.0);
  return r;
}

}  // namespace

template <class T>
MeanFieldCoefficients<T> coefficients(const MFVector<T>& x, const HubbardParams& p, double gamma) {
  MeanFieldCoefficients<T> c;
  for (int j = 0; j < 2; ++j) {
    const int jb = 1 - j;
    for (int s = 0; s < 2; ++s) {
      const int ms = 1 - s;
      // -(-1)^j i gamma with sites numbered from 1: +i gamma on site 1.
      const cplx gain = (j == 0 ? 1.0 : -1.0) * I * gamma;
      c.eps[j][s] = p.eps + p.U * occ(x, j, ms) + p.K * (occ(x, jb, 0) + occ(x, jb, 1)) - p.J * occ(x, jb, s) +
                    p.V * (bond(x, j, ms) + bond(x, jb, ms)) + gain;
      c.t[j][s] = p.t + p.V * (occ(x, j, ms) + occ(x, jb, ms));
      c.J[j][s] = -p.J * flip(x, jb, ms);
    }
    c.P[j] = p.J * pair(x, jb);
    c.P_star[j] = p.J * pair_dag(x, jb);
  }
  return c;
}

template <class T>
MFVector<T> rhs_hermitian(const MFVector<T>& x, const HubbardParams& p) {
  const auto c = coefficients(x, p, 0.0);
  MFVector<T> r;
  for (int s = 0; s < 2; ++s) {
    const int ms = 1 - s;
    // i d<n_{1s}>/dT and i d<n_{2s}>/dT
    r[0 + s] = c.t[0][s] * bond(x, 0, s) - c.t[1][s] * bond(x, 1, s) + c.J[0][s] * flip(x, 0, s) -
               c.J[0][ms] * flip(x, 0, ms) + c.P[0] * pair_dag(x, 0) - c.P_star[0] * pair(x, 0);
    r[2 + s] = -(c.t[0][s] * bond(x, 0, s)) + c.t[1][s] * bond(x, 1, s) + c.J[1][s] * flip(x, 1, s) -
               c.J[1][ms] * flip(x, 1, ms) + c.P[1] * pair_dag(x, 1) - c.P_star[1] * pair(x, 1);
    // bonds
    r[4 + s] = (c.eps[1][s] - c.eps[0][s]) * bond(x, 0, s) + c.t[1][s] * (occ(x, 0, s) - occ(x, 1, s));
    r[6 + s] = (c.eps[0][s] - c.eps[1][s]) * bond(x, 1, s) + c.t[0][s] * (occ(x, 1, s) - occ(x, 0, s));
  }
  for (int j = 0; j < 2; ++j) {
    r[8 + 2 * j] = (c.eps[j][1] - c.eps[j][0]) * flip(x, j, 0) + c.J[j][1] * (occ(x, j, 0) - occ(x, j, 1));
    r[9 + 2 * j] = (c.eps[j][0] - c.eps[j][1]) * flip(x, j, 1) + c.J[j][0] * (occ(x, j, 1) - occ(x, j, 0));
    const T n_sum = occ(x, j, 0) + occ(x, j, 1);
    r[12 + 2 * j] = -((c.eps[j][0] + c.eps[j][1]) * pair_dag(x, j)) + c.P_star[j] * (n_sum - 1.0);
    r[13 + 2 * j] = (c.eps[j][0] + c.eps[j][1]) * pair(x, j) - c.P[j] * (n_sum - 1.0);
  }
  return times_minus_i(r);
}

template <class T>
MFVector<T> rhs_nonhermitian(const MFVector<T>& x, const HubbardParams& p, double gamma) {
  const auto c = coefficients(x, p, gamma);
  const cplx ig = I * gamma;
  const T imbalance = (occ(x, 0, 0) - occ(x, 1, 0)) + (occ(x, 0, 1) - occ(x, 1, 1));
  MFVector<T> r;
  for (int s = 0; s < 2; ++s) {
    const int ms = 1 - s;
    r[0 + s] = c.t[0][s] * bond(x, 0, s) - c.t[1][s] * bond(x, 1, s) + c.J[0][s] * flip(x, 0, s) -
               c.J[0][ms] * flip(x, 0, ms) + c.P[0] * pair_dag(x, 0) - c.P_star[0] * pair(x, 0) +
               ig * occ(x, 0, s) - 2.0 * ig * (pair_dag(x, 0) * pair(x, 0)) - 2.0 * ig * occ(x, 0, s) * imbalance;
    r[2 + s] = -(c.t[0][s] * bond(x, 0, s)) + c.t[1][s] * bond(x, 1, s) + c.J[1][s] * flip(x, 1, s) -
               c.J[1][ms] * flip(x, 1, ms) + c.P[1] * pair_dag(x, 1) - c.P_star[1] * pair(x, 1) -
               ig * occ(x, 1, s) + 2.0 * ig * (pair_dag(x, 1) * pair(x, 1)) - 2.0 * ig * occ(x, 1, s) * imbalance;
    r[4 + s] = (c.eps[1][s] - c.eps[0][s]) * bond(x, 0, s) + c.t[1][s] * (occ(x, 0, s) - occ(x, 1, s)) +
               ig * bond(x, 0, s) - 2.0 * ig * bond(x, 0, s) * imbalance;
    r[6 + s] = (c.eps[0][s] - c.eps[1][s]) * bond(x, 1, s) + c.t[0][s] * (occ(x, 1, s) - occ(x, 0, s)) -
               ig * bond(x, 1, s) - 2.0 * ig * bond(x, 1, s) * imbalance;
  }
  for (int j = 0; j < 2; ++j) {
    const cplx site = j == 0 ? ig : -ig;  // +i gamma on site 1, -i gamma on site 2
    r[8 + 2 * j] = (c.eps[j][1] - c.eps[j][0]) * flip(x, j, 0) + c.J[j][1] * (occ(x, j, 0) - occ(x, j, 1)) +
                   site * flip(x, j, 0) - 2.0 * ig * flip(x, j, 0) * imbalance;
    r[9 + 2 * j] = (c.eps[j][0] - c.eps[j][1]) * flip(x, j, 1) + c.J[j][0] * (occ(x, j, 1) - occ(x, j, 0)) +
                   site * flip(x, j, 1) - 2.0 * ig * flip(x, j, 1) * imbalance;
    const T n_sum = occ(x, j, 0) + occ(x, j, 1);
    const T& dag = pair_dag(x, j);
    const T& d = pair(x, j);
    r[12 + 2 * j] = -((c.eps[j][0] + c.eps[j][1]) * dag) + c.P_star[j] * (n_sum - 1.0) + 2.0 * site * dag +
                    2.0 * site * dag * occ(x, j, 1) - 2.0 * ig * dag * imbalance;
    r[13 + 2 * j] = (c.eps[j][0] + c.eps[j][1]) * d - c.P[j] * (n_sum - 1.0) - site * d +
                    2.0 * site * d * occ(x, j, 1) - 2.0 * ig * d * imbalance;
  }
  return times_minus_i(r);
}

template MeanFieldCoefficients<cplx> coefficients(const MFVector<cplx>&, const HubbardParams&, double);
template MeanFieldCoefficients<Dual> coefficients(const MFVector<Dual>&, const HubbardParams&, double);
template MFVector<cplx> rhs_hermitian(const MFVector<cplx>&, const HubbardParams&);
template MFVector<Dual> rhs_hermitian(const MFVector<Dual>&, const HubbardParams&);
template MFVector<cplx> rhs_nonhermitian(const MFVector<cplx>&, const HubbardParams&, double);
template MFVector<Dual> rhs_nonhermitian(const MFVector<Dual>&, const HubbardParams&, double);

Jacobian16 jacobian(const MeanFieldState& x, const HubbardParams& p, double gamma, bool hermitian) {
  Jacobian16 jac;
  MFVector<Dual> seed;
  for (int k = 0; k < mf::kSize; ++k) seed[k] = Dual(x[k]);
  for (int k = 0; k < mf::kSize; ++k) {
    seed[k].d = 1.0;
    const MFVector<Dual> r = hermitian ? rhs_hermitian(seed, p) : rhs_nonhermitian(seed, p, gamma);
    for (int i = 0; i < mf::kSize; ++i) jac(i, k) = r[i].d;
    seed[k].d = 0.0;
  }
  return jac;
}

cplx mean_field_energy(const MeanFieldState& x, const HubbardParams& p, double gamma) {
  const auto c = coefficients(x, p, gamma);
  cplx e = 0.0;
  for (int j = 0; j < 2; ++j) {
    for (int s = 0; s < 2; ++s) {
      e += c.eps[j][s] * occ(x, j, s) + c.t[j][s] * bond(x, j, s) + c.J[j][s] * flip(x, j, s);
    }
    e += c.P[j] * pair_dag(x, j) + c.P_star[j] * pair(x, j);
  }
  return e;
}

cplx energy_functional(const MeanFieldState& x, const HubbardParams& p, double gamma) {
  cplx one_body = 0.0;
  for (int j = 0; j < 2; ++j) {
    const cplx gain = (j == 0 ? 1.0 : -1.0) * I * gamma;
    for (int s = 0; s < 2; ++s) one_body += (p.eps + gain) * occ(x, j, s) + p.t * bond(x, j, s);
  }
  return 0.5 * (mean_field_energy(x, p, gamma) + one_body);
}

// ---------------------------------------------------------------------------

MeanFieldState initial_state_at(const HubbardParams& p) {
  const Eigen::Matrix<double, 6, 6> h = build_matrix(p, 0.0).real();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalError("ground-state diagonalization failed");
  const Eigen::Matrix<double, 6, 1> v = solver.eigenvectors().col(0);
  // 1-based basis amplitudes, matching the dimer basis order.
  auto c = [&](int k) { return v(k - 1); };
  auto w = [&](int k) { return c(k) * c(k); };

  MeanFieldState x{};
  // Occupied spin orbitals per basis state: |1> 1u1d, |2> 1u2u, |3> 1u2d,
  // |4> 1d2d, |5> 2u2d, |6> 2u1d.
  x[mf::n1u] = w(1) + w(2) + w(3);
  x[mf::n1d] = w(1) + w(4) + w(6);
  x[mf::n2u] = w(2) + w(5) + w(6);
  x[mf::n2d] = w(3) + w(4) + w(5);
  // c+_{1s} c_{2s} connects |6>,|5> -> |1>,|3> (up) and |3>,|5> -> |1>,|6> (down).
  x[mf::n12u] = c(1) * c(6) + c(3) * c(5);
  x[mf::n12d] = c(1) * c(3) + c(6) * c(5);
  x[mf::n21u] = x[mf::n12u];  // real amplitudes
  x[mf::n21d] = x[mf::n12d];
  // Spin flips connect the S_z = 0 states to the triplet members |2>, |4>.
  x[mf::n1ud] = c(3) * c(4) - c(2) * c(6);
  x[mf::n1du] = c(4) * c(3) - c(6) * c(2);
  x[mf::n2ud] = c(2) * c(3) - c(6) * c(4);
  x[mf::n2du] = c(3) * c(2) - c(4) * c(6);
  // Pair amplitudes change particle number: zero in a two-electron state.

  // The ground state is site-symmetric; make that exact in floating point.
  // The symmetric point is a fixed point of the gamma = 0 equations but a
  // linearly unstable one, so last-bit asymmetry would otherwise grow.
  for (int s = 0; s < 2; ++s) {
    const cplx n = 0.5 * (x[mf::n1u + s] + x[mf::n2u + s]);
    x[mf::n1u + s] = x[mf::n2u + s] = n;
    const cplx b = 0.5 * (x[mf::n12u + s] + x[mf::n21u + s]);
    x[mf::n12u + s] = x[mf::n21u + s] = b;
  }
  return x;
}

DynamicsSetup initial_state(double gamma, bool frozen_geometry, const SolverOptions& opt) {
  if (!std::isfinite(gamma) || gamma < 0.0) throw InputError("gamma must be finite and >= 0");
  const EquilibriumPoint eq = equilibrium(frozen_geometry ? 0.0 : gamma, opt);
  if (!eq.bound()) {
    throw InputError("gamma=" + std::to_string(gamma) + " has no bound equilibrium; dynamics needs gamma < gamma_D");
  }
  DynamicsSetup setup;
  setup.gamma = gamma;
  setup.geom = {eq.R0, eq.alpha0};
  setup.params = hubbard_params(setup.geom);
  setup.initial = initial_state_at(setup.params);
  return setup;
}

bool dissociated(const MeanFieldState& x, const IntegrateOptions& opt) {
  for (int k = mf::n1u; k <= mf::n2d; ++k) {
    if (std::abs(x[k].imag()) > opt.imag_threshold) return true;
    if (x[k].real() < opt.occupation_low || x[k].real() > opt.occupation_high) return true;
  }
  return false;
}

namespace {

using RealState = std::array<double, 2 * mf::kSize>;

RealState to_real(const MeanFieldState& x) {
  RealState r;
  for (int k = 0; k < mf::kSize; ++k) {
    r[2 * k] = x[k].real();
    r[2 * k + 1] = x[k].imag();
  }
  return r;
}

MeanFieldState to_complex(const RealState& r) {
  MeanFieldState x;
  for (int k = 0; k < mf::kSize; ++k) x[k] = {r[2 * k], r[2 * k + 1]};
  return x;
}

bool finite(const RealState& r) {
  for (double v : r)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

Trajectory integrate(const DynamicsSetup& setup, const IntegrateOptions& opt) {
  namespace odeint = boost::numeric::odeint;
  if (!(opt.t_max > 0.0)) throw InputError("t_max must be positive");
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) throw InputError("tolerances must be positive");
  if (opt.output_interval < 0.0) throw InputError("output interval must be >= 0");

  const HubbardParams& p = setup.params;
  const double gamma = setup.gamma;
  auto system = [&](const RealState& r, RealState& dr, double) {
    const MeanFieldState x = to_complex(r);
    dr = to_real(opt.hermitian ? rhs_hermitian(x, p) : rhs_nonhermitian(x, p, gamma));
  };

  auto stepper = odeint::make_dense_output(opt.atol, opt.rtol, odeint::runge_kutta_dopri5<RealState>());
  stepper.initialize(to_real(setup.initial), 0.0, std::min(1e-3, opt.t_max));

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(setup.initial);
  if (dissociated(setup.initial, opt)) {
    traj.T_D = 0.0;
    if (opt.stop_at_event) return traj;
  }

  auto state_at = [&](double t) {
    RealState r;
    stepper.calc_state(t, r);
    return to_complex(r);
  };

  double next_output = opt.output_interval;
  while (stepper.current_time() < opt.t_max) {
    const double t_prev = stepper.current_time();
    try {
      stepper.do_step(system);
    } catch (const std::exception& e) {
      throw NumericalError(std::string("integrator failed: ") + e.what(), t_prev);
    }
    ++traj.steps;
    const double t_new = stepper.current_time();
    if (!(t_new - t_prev > 1e-14 * std::max(1.0, t_prev)) || !finite(stepper.current_state())) {
      throw NumericalError("step size underflow or non-finite state", t_prev);
    }
    const double t_end = std::min(t_new, opt.t_max);

    std::optional<double> event;
    if (!traj.T_D && dissociated(state_at(t_end), opt)) {
      double lo = t_prev, hi = t_end;
      while (hi - lo > opt.event_resolution) {
        const double mid = 0.5 * (lo + hi);
        (dissociated(state_at(mid), opt) ? hi : lo) = mid;
      }
      event = hi;
      traj.T_D = hi;
    }
    const double record_until = (event && opt.stop_at_event) ? *event : t_end;

    if (opt.output_interval > 0.0) {
      while (next_output <= record_until + 1e-12 * record_until) {
        traj.times.push_back(next_output);
        traj.states.push_back(state_at(next_output));
        next_output += opt.output_interval;
      }
      if (record_until != traj.times.back() && (record_until >= opt.t_max || event)) {
        traj.times.push_back(record_until);
        traj.states.push_back(state_at(record_until));
      }
    } else {
      traj.times.push_back(record_until);
      traj.states.push_back(state_at(record_until));
    }
    if (event && opt.stop_at_event) break;
  }
  return traj;
}

std::vector<TdPoint> td_sweep(const std::vector<double>& gammas, const IntegrateOptions& opt, bool frozen_geometry,
                              const SolverOptions& solver) {
  IntegrateOptions o = opt;
  o.stop_at_event = true;
  return parallel_map(gammas.size(), [&](std::size_t i) {
    TdPoint pt;
    pt.gamma = gammas[i];
    try {
      const DynamicsSetup setup = initial_state(gammas[i], frozen_geometry, solver);
      pt.T_D = integrate(setup, o).T_D;
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    return pt;
  });
}

TdFit fit_td(const std::vector<TdPoint>& points) {
  std::vector<double> g, t;
  for (const auto& pt : points) {
    if (pt.error.empty() && pt.T_D && *pt.T_D > 0.0 && std::isfinite(*pt.T_D) && pt.gamma > 0.0) {
      g.push_back(pt.gamma);
      t.push_back(*pt.T_D);
    }
  }
  if (g.size() < 5) throw InputError("T_D fit needs at least five finite points, got " + std::to_string(g.size()));
  const int n = static_cast<int>(g.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = -std::log(g[i]);
    A(i, 2) = g[i];
    y(i) = std::log(t[i]);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < 3) throw NumericalError("T_D fit is rank deficient (gamma values too few or degenerate)");
  const Eigen::Vector3d coef = qr.solve(y);
  TdFit fit;
  fit.a = std::exp(coef(0));
  fit.b = coef(1);
  fit.c = coef(2);
  fit.rms_log_residual = std::sqrt((A * coef - y).squaredNorm() / n);
  fit.points = n;
  return fit;
}

}  // namespace h2pt
