#include "h2pt/dimer_hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "h2pt/errors.hpp"

namespace h2pt {

namespace {

using Matrix3c = Eigen::Matrix<cplx, 3, 3>;

void check_finite(const HubbardParams& p, double gamma) {
  for (double v : {p.eps, p.t, p.U, p.K, p.J, p.V, gamma}) {
    if (!std::isfinite(v)) throw InputError("Hubbard parameters and gamma must be finite");
  }
}

bool all_finite(const std::array<cplx, 6>& e) {
  return std::all_of(e.begin(), e.end(),
                      [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

// Orders three cubic-block roots as (E4, E5, E6).
std::array<cplx, 3> label_cubic_roots(std::array<cplx, 3> r) {
  const bool complex_pair = std::any_of(r.begin(), r.end(),
                                        [](const cplx& z) { return std::abs(z.imag()) > kPtImagTolerance; });
  if (!complex_pair) {
    std::sort(r.begin(), r.end(), [](const cplx& a, const cplx& b) { return a.real() < b.real(); });
    return {r[0], r[2], r[1]};
  }
  std::sort(r.begin(), r.end(), [](const cplx& a, const cplx& b) { return std::abs(a.imag()) < std::abs(b.imag()); });
  if (r[1].imag() > r[2].imag()) std::swap(r[1], r[2]);
  return {r[0], r[1], r[2]};
}

// Best permutation of `values` onto `targets`; returns reordered values.
std::array<cplx, 6> match_to(const std::array<cplx, 6>& targets, const std::array<cplx, 6>& values,
                             double* worst = nullptr) {
  std::array<int, 6> perm;
  std::iota(perm.begin(), perm.end(), 0);
  std::array<int, 6> best = perm;
  double best_sum = std::numeric_limits<double>::infinity();
  double best_max = 0.0;
  do {
    double sum = 0.0, mx = 0.0;
    for (int i = 0; i < 6; ++i) {
      const double d = std::abs(targets[i] - values[perm[i]]);
      sum += d;
      mx = std::max(mx, d);
    }
    if (sum < best_sum) {
      best_sum = sum;
      best_max = mx;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::array<cplx, 6> out;
  for (int i = 0; i < 6; ++i) out[i] = values[best[i]];
  if (worst) *worst = best_max;
  return out;
}

std::array<cplx, 6> raw_eigenvalues(const Matrix6c& m) {
  Eigen::ComplexEigenSolver<Matrix6c> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw NumericalError("complex eigen-solver failed on the 6x6 dimer matrix");
  std::array<cplx, 6> out;
  for (int i = 0; i < 6; ++i) out[i] = solver.eigenvalues()[i];
  if (!all_finite(out)) throw NumericalError("eigen-solver returned non-finite eigenvalues");
  return out;
}

DimerSpectrum finish(std::array<cplx, 6> e, const HubbardParams& p, double gamma) {
  DimerSpectrum s;
  s.energies = e;
  s.pt_broken = s.max_abs_imag() > kPtImagTolerance;
  s.a_minus_b = discriminant(p, gamma).a_minus_b();
  return s;
}

}  // namespace

GainLossCoupling GainLossCoupling::from(double g) {
  if (!std::isfinite(g)) throw InputError("gamma must be finite");
  return {std::abs(g)};
}

double DimerSpectrum::max_abs_imag() const {
  double m = 0.0;
  for (const auto& z : energies) m = std::max(m, std::abs(z.imag()));
  return m;
}

Matrix6c build_matrix(const HubbardParams& p, double gamma) {
  check_finite(p, gamma);
  const cplx i(0.0, 1.0);
  const double tv = p.t + p.V;
  const double h2 = 2.0 * p.eps + p.K - p.J;
  const double cov = 2.0 * p.eps + p.K;
  const cplx h_plus = 2.0 * p.eps + p.U + 2.0 * i * gamma;
  const cplx h_minus = 2.0 * p.eps + p.U - 2.0 * i * gamma;
  Matrix6c m;
  // clang-format off
  m << h_plus, 0,  tv,   0,  p.J,     tv,
       0,      h2, 0,    0,  0,       0,
       tv,     0,  cov,  0,  tv,      -p.J,
       0,      0,  0,    h2, 0,       0,
       p.J,    0,  tv,   0,  h_minus, tv,
       tv,     0,  -p.J, 0,  tv,      cov;
  // clang-format on
  return m;
}

Discriminant discriminant(const HubbardParams& p, double g) {
  check_finite(p, g);
  const double J = p.J, K = p.K, U = p.U, tv = p.t + p.V;
  const double KU = K - U;
  const double a_inner = (2 * J + K - U) * ((J - K + U) * (4 * J - K + U) + 18 * tv * tv) - 36 * (J - K + U) * g * g;
  const double M = 4 * J * J + KU * KU - 2 * J * KU + 12 * (tv - g) * (tv + g);
  return {4.0 * a_inner * a_inner, 4.0 * M * M * M};
}

DimerSpectrum spectrum_numeric(const HubbardParams& p, double gamma) {
  const Matrix6c m = build_matrix(p, gamma);
  const std::array<cplx, 6> raw = raw_eigenvalues(m);

  // Symmetry-adapted reference values, used only to attach labels.
  const double r2 = std::numbers::sqrt2;
  Matrix3c block;
  block << m(0, 0), m(0, 4), (m(0, 2) + m(0, 5)) / r2,
           m(4, 0), m(4, 4), (m(4, 2) + m(4, 5)) / r2,
           (m(2, 0) + m(5, 0)) / r2, (m(2, 4) + m(5, 4)) / r2,
           0.5 * (m(2, 2) + m(2, 5) + m(5, 2) + m(5, 5));
  Eigen::ComplexEigenSolver<Matrix3c> cubic(block, false);
  if (cubic.info() != Eigen::Success) throw NumericalError("eigen-solver failed on the 3x3 block");
  const auto roots = label_cubic_roots({cubic.eigenvalues()[0], cubic.eigenvalues()[1], cubic.eigenvalues()[2]});
  const std::array<cplx, 6> reference = {m(1, 1), m(3, 3), 0.5 * (m(2, 2) - m(2, 5) - m(5, 2) + m(5, 5)),
                                         roots[0], roots[1], roots[2]};
  return finish(match_to(reference, raw), p, gamma);
}

ClosedFormResult spectrum_closed_form(const HubbardParams& p, double g, double match_tol) {
  const DimerSpectrum numeric = spectrum_numeric(p, g);
  const double J = p.J, K = p.K, U = p.U, e = p.eps, tv = p.t + p.V;
  const double KU = K - U;
  const Discriminant d = discriminant(p, g);
  const cplx C = -8 * J * J * J + 6 * J * J * KU + 3 * J * (KU * KU + 12 * (-tv * tv + g * g)) -
                 KU * (KU * KU + 18 * (tv * tv + 2 * g * g)) + 0.5 * std::sqrt(cplx(d.A - d.B, 0.0));
  const double N4 = -4 * J * J + 2 * J * KU - KU * KU + 12 * (-tv * tv + g * g);
  const double M = 4 * J * J + KU * KU - 2 * J * KU + 12 * (tv - g) * (tv + g);
  const cplx i(0.0, 1.0);
  const double s3 = std::sqrt(3.0);
  const double scale = std::max(1.0, std::abs(numeric.ground()));

  ClosedFormResult best;
  best.mismatch = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const cplx c = std::pow(C, 1.0 / 3.0) * std::polar(1.0, 2.0 * std::numbers::pi * k / 3.0);
    if (std::abs(c) < 1e-300) break;
    std::array<cplx, 6> E;
    E[0] = E[1] = -J + K + 2 * e;
    E[2] = J + K + 2 * e;
    E[3] = (-J + K + 2 * U + N4 / c - c + 6 * e) / 3.0;
    E[4] = (2.0 * (1.0 + i * s3) * M / c + 2.0 * (1.0 - i * s3) * c + 4.0 * (-J + K + 2 * U + 6 * e)) / 12.0;
    E[5] = (2.0 * (1.0 - i * s3) * M / c + 2.0 * (1.0 + i * s3) * c + 4.0 * (-J + K + 2 * U + 6 * e)) / 12.0;
    if (!all_finite(E)) continue;
    const double dist = multiset_distance(E, numeric.energies);
    if (dist < best.mismatch) {
      // Which formula carries which label depends on the branch; label by
      // proximity to the diagonalized spectrum.
      best.spectrum = finish(match_to(numeric.energies, E), p, g);
      best.branch = k;
      best.mismatch = dist;
    }
    if (dist <= match_tol * scale) return best;
  }
  spdlog::warn("closed-form spectrum disagrees with diagonalization (best branch {}, mismatch {:.3e}); "
               "using numeric values",
               best.branch, best.mismatch);
  best.spectrum = numeric;
  best.fell_back = true;
  return best;
}

bool pt_phase(const HubbardParams& p, double gamma) { return spectrum_numeric(p, gamma).pt_broken; }

double ground_energy(const HubbardParams& p, double gamma) { return spectrum_numeric(p, gamma).ground().real(); }

std::vector<DimerSpectrum> track_spectrum(const HubbardParams& p, const std::vector<double>& gammas) {
  std::vector<DimerSpectrum> out;
  out.reserve(gammas.size());
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    if (k > 0 && !(gammas[k] > gammas[k - 1])) throw InputError("gamma path must be strictly increasing");
    if (k == 0) {
      out.push_back(spectrum_numeric(p, gammas[k]));
      continue;
    }
    const auto raw = raw_eigenvalues(build_matrix(p, gammas[k]));
    out.push_back(finish(match_to(out.back().energies, raw), p, gammas[k]));
  }
  return out;
}

double multiset_distance(const std::array<cplx, 6>& a, const std::array<cplx, 6>& b) {
  double worst = 0.0;
  match_to(a, b, &worst);
  return worst;
}

}  // namespace h2pt
