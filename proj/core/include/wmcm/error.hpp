#pragma once

#include <stdexcept>
#include <string>

namespace wmcm {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto exit codes (usage 1, data 2, numerical 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments or configuration (bad rank, empty grid, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input data violating the model's assumptions or failing to parse.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite objective, singular system that cannot be regularized, etc.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// An iterative method hit its iteration cap without meeting its tolerance.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double last_value)
      : NumericalError(what), last_value_(last_value) {}

  // Objective (or deviance) at the final iterate.
  double last_value() const noexcept { return last_value_; }

 private:
  double last_value_;
};

}  // namespace wmcm
