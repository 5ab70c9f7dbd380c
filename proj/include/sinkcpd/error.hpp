#pragma once

#include <stdexcept>
#include <string>

namespace sinkcpd {

/// Malformed arguments: shape mismatches, out-of-range parameters, bad files.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values that survived log-domain stabilization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Metric learning produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int last_finite_iteration)
      : std::runtime_error(what), last_finite_iteration_(last_finite_iteration) {}

  /// -1 when not even the initial loss was finite.
  int last_finite_iteration() const noexcept { return last_finite_iteration_; }

 private:
  int last_finite_iteration_;
};

}  // namespace sinkcpd
