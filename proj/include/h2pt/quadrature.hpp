#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.
// The integrand may be any callable double -> double. Nested use gives
// tensor-product 2D quadrature with the inner error folded into the outer.

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <utility>
#include <vector>

#include "h2pt/errors.hpp"

namespace h2pt::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
};

struct Tolerance {
  double abs = 1e-14;
  double rel = 1e-12;
  int max_intervals = 4000;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

template <class F>
Panel gk15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kKronrodNodes[i];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[i] * pair;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * pair;
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

/// Integrates f over [a, b]. Throws NumericalError carrying the best value and
/// its error estimate when the tolerance cannot be met within max_intervals.
template <class F>
Result integrate(F&& f, double a, double b, const Tolerance& tol = {}) {
  if (!(std::isfinite(a) && std::isfinite(b))) throw InputError("quadrature limits must be finite");
  if (a == b) return {};

  std::priority_queue<detail::Panel> panels;
  detail::Panel first = detail::gk15(f, a, b);
  double total = first.value;
  double error = first.error;
  panels.push(first);

  int count = 1;
  while (error > std::max(tol.abs, tol.rel * std::abs(total))) {
    if (count >= tol.max_intervals) {
      throw NumericalError("adaptive quadrature did not converge", total, error);
    }
    detail::Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      throw NumericalError("adaptive quadrature exhausted floating-point resolution", total, error);
    }
    detail::Panel left = detail::gk15(f, worst.a, mid);
    detail::Panel right = detail::gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    ++count;
  }

  // Re-sum to shed the drift accumulated by incremental updates.
  double value = 0.0, err = 0.0;
  while (!panels.empty()) {
    value += panels.top().value;
    err += panels.top().error;
    panels.pop();
  }
  return {value, err};
}

/// Tensor-product integral of f(x, y) over [xa, xb] x [ya, yb]. The inner
/// integrals run at a tighter tolerance; their error estimates, integrated
/// over x by the trapezoid rule on the outer nodes, add to the outer one.
template <class F>
Result integrate_2d(F&& f, double xa, double xb, double ya, double yb, const Tolerance& tol = {}) {
  Tolerance inner_tol = tol;
  inner_tol.abs = tol.abs * 1e-2;
  inner_tol.rel = tol.rel * 1e-1;
  std::vector<std::pair<double, double>> inner_errors;
  auto outer = [&](double x) {
    Result r = integrate([&](double y) { return f(x, y); }, ya, yb, inner_tol);
    inner_errors.emplace_back(x, r.error);
    return r.value;
  };
  Result r = integrate(outer, xa, xb, tol);
  std::sort(inner_errors.begin(), inner_errors.end());
  double accumulated = 0.0;
  for (std::size_t i = 1; i < inner_errors.size(); ++i) {
    accumulated += 0.5 * (inner_errors[i].second + inner_errors[i - 1].second) *
                   (inner_errors[i].first - inner_errors[i - 1].first);
  }
  r.error += std::abs(accumulated);
  return r;
}

}  // namespace h2pt::quad
