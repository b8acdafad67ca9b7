#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace bdconv {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a factorization or an iterative numerical routine cannot
// complete. `smallest_eigenvalue` is NaN when no estimate is available.
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what,
                            double smallest_eigenvalue = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), smallest_eigenvalue_(smallest_eigenvalue) {}
  double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

 private:
  double smallest_eigenvalue_;
};

// A convergence diagnostic that cannot be evaluated on the given samples.
class DiagnosticUndefined : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wraps a failure inside a sampler iteration with the name of the step
// that raised it.
class StepFailure : public std::runtime_error {
 public:
  StepFailure(std::string step, const std::string& cause)
      : std::runtime_error(step + ": " + cause), step_(std::move(step)) {}
  const std::string& step() const noexcept { return step_; }

 private:
  std::string step_;
};

}  // namespace bdconv
