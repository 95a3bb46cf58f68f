#pragma once

#include <stdexcept>
#include <string>

namespace h2pt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments: non-finite numbers, out-of-domain parameters, bad grids.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to reach its target (quadrature, minimizer,
/// root bracket, ODE step control, eigen-solver).
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double best_value = 0.0, double error_estimate = 0.0)
      : Error(what), best_value_(best_value), error_estimate_(error_estimate) {}

  double best_value() const noexcept { return best_value_; }
  double error_estimate() const noexcept { return error_estimate_; }

 private:
  double best_value_;
  double error_estimate_;
};

}  // namespace h2pt
