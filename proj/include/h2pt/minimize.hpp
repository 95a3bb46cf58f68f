#pragma once

// Scalar search helpers shared by the variational and threshold code.
// Minimisation is Brent's golden-section/parabolic method from Boost.Math.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include <boost/math/tools/minima.hpp>

#include "h2pt/errors.hpp"

namespace h2pt {

struct ScalarMinimum {
  double x = 0.0;
  double f = 0.0;
  std::uintmax_t evaluations = 0;
};

/// Brent minimisation of f on [lo, hi]. Resolution is about 1e-8 relative in x,
/// the best double precision allows for a smooth minimum.
template <class F>
ScalarMinimum brent_minimize(F&& f, double lo, double hi, std::uintmax_t max_iter = 200) {
  constexpr int bits = std::numeric_limits<double>::digits / 2;
  std::uintmax_t iters = max_iter;
  const auto [x, fx] = boost::math::tools::brent_find_minima(f, lo, hi, bits, iters);
  if (iters >= max_iter) throw NumericalError("Brent minimisation hit its iteration limit", fx);
  return {x, fx, iters};
}

/// Shrinks [lo, hi] around the switch of a monotone predicate with
/// pred(lo) == false and pred(hi) == true. Returns the final bracket.
struct Bracket {
  double lo = 0.0;  // last point where the predicate is false
  double hi = 0.0;  // first point where it is true
  double mid() const { return 0.5 * (lo + hi); }
};

template <class Pred>
Bracket bisect_predicate(Pred&& pred, double lo, double hi, double tol, const std::string& what) {
  if (pred(lo)) throw NumericalError(what + ": bracket low end already satisfies the condition", lo);
  if (!pred(hi)) throw NumericalError(what + ": bracket high end does not satisfy the condition", hi);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (pred(mid) ? hi : lo) = mid;
  }
  return {lo, hi};
}

}  // namespace h2pt
