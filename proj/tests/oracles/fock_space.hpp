#pragma once

// Brute-force second quantisation on four spin orbitals (1up, 1dn, 2up, 2dn)
// via the Jordan-Wigner construction. Test-only: shares nothing with the
// library beyond the parameter struct.

#include <algorithm>
#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "h2pt/slater_integrals.hpp"

namespace oracle {

using cplx = std::complex<double>;
using FockMatrix = Eigen::Matrix<cplx, 16, 16>;
using FockVector = Eigen::Matrix<cplx, 16, 1>;

enum Mode : int { up1 = 0, dn1 = 1, up2 = 2, dn2 = 3 };

inline int mode(int site, int spin) { return 2 * site + spin; }

// c_k on occupation-number states; bit k of the index is orbital k.
inline FockMatrix annihilator(int k) {
  FockMatrix c = FockMatrix::Zero();
  for (int s = 0; s < 16; ++s) {
    if (!(s >> k & 1)) continue;
    int parity = 0;
    for (int m = 0; m < k; ++m) parity += s >> m & 1;
    c(s ^ (1 << k), s) = (parity % 2) ? -1.0 : 1.0;
  }
  return c;
}

struct Operators {
  std::array<FockMatrix, 4> c;
  std::array<FockMatrix, 4> cd;
  Operators() {
    for (int k = 0; k < 4; ++k) {
      c[k] = annihilator(k);
      cd[k] = c[k].adjoint();
    }
  }
  FockMatrix n(int k) const { return cd[k] * c[k]; }
  FockMatrix hop(int a, int b) const { return cd[a] * c[b]; }
};

inline const Operators& ops() {
  static const Operators o;
  return o;
}

/// Two-site Hubbard Hamiltonian with K, exchange, pair hopping and
/// correlated hopping, written term by term from operators, plus
/// +i gamma n_1 - i gamma n_2.
inline FockMatrix hubbard_hamiltonian(const h2pt::HubbardParams& p, double gamma) {
  const Operators& o = ops();
  FockMatrix H = FockMatrix::Zero();
  const FockMatrix n1 = o.n(up1) + o.n(dn1);
  const FockMatrix n2 = o.n(up2) + o.n(dn2);
  H += p.eps * (n1 + n2);
  for (int s = 0; s < 2; ++s) {
    const FockMatrix hop = o.hop(mode(0, s), mode(1, s)) + o.hop(mode(1, s), mode(0, s));
    H += p.t * hop;
    const FockMatrix other = o.n(mode(0, 1 - s)) + o.n(mode(1, 1 - s));
    H += p.V * (other * hop);
  }
  H += p.U * (o.n(up1) * o.n(dn1) + o.n(up2) * o.n(dn2));
  H += (p.K - 0.5 * p.J) * (n1 * n2);
  // S1.S2 = (S1+ S2- + S1- S2+)/2 + S1z S2z
  const FockMatrix Sp1 = o.hop(up1, dn1), Sm1 = o.hop(dn1, up1);
  const FockMatrix Sp2 = o.hop(up2, dn2), Sm2 = o.hop(dn2, up2);
  const FockMatrix Sz1 = 0.5 * (o.n(up1) - o.n(dn1));
  const FockMatrix Sz2 = 0.5 * (o.n(up2) - o.n(dn2));
  H += -2.0 * p.J * (0.5 * (Sp1 * Sm2 + Sm1 * Sp2) + Sz1 * Sz2);
  const FockMatrix pair = o.cd[up1] * o.cd[dn1] * o.c[dn2] * o.c[up2];
  H += p.J * (pair + pair.adjoint());
  H += cplx(0.0, gamma) * n1 - cplx(0.0, gamma) * n2;
  return H;
}

/// Indices of the two-electron Fock states.
inline std::vector<int> two_electron_states() {
  std::vector<int> out;
  for (int s = 0; s < 16; ++s)
    if (__builtin_popcount(s) == 2) out.push_back(s);
  return out;
}

/// Eigenvalues of H restricted to the two-electron sector, sorted by real part.
inline std::vector<cplx> two_electron_spectrum(const FockMatrix& H) {
  const auto idx = two_electron_states();
  Eigen::MatrixXcd block(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) block(i, j) = H(idx[i], idx[j]);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(block);
  std::vector<cplx> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
  return ev;
}

/// Fock vectors of the six product states used by the library's 6x6 matrix:
/// c+1up c+1dn, c+1up c+2up, c+1up c+2dn, c+1dn c+2dn, c+2up c+2dn, c+2up c+1dn
/// acting on the vacuum.
inline std::array<FockVector, 6> product_basis() {
  const Operators& o = ops();
  FockVector vac = FockVector::Zero();
  vac(0) = 1.0;
  const int pairs[6][2] = {{up1, dn1}, {up1, up2}, {up1, dn2}, {dn1, dn2}, {up2, dn2}, {up2, dn1}};
  std::array<FockVector, 6> out;
  for (int k = 0; k < 6; ++k) out[k] = o.cd[pairs[k][0]] * (o.cd[pairs[k][1]] * vac);
  return out;
}

inline cplx expectation(const FockVector& psi, const FockMatrix& op) {
  return psi.dot(op * psi) / psi.squaredNorm();
}

}  // namespace oracle
