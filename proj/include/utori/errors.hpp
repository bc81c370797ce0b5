#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace utori {

// A hypothesis of an estimate or a precondition of an operation does not hold.
// `bound()` is the short tag of the violated condition, e.g. "(na)" or "(f4)".
class HypothesisError : public std::runtime_error {
 public:
  HypothesisError(std::string bound, const std::string& detail)
      : std::runtime_error(bound + ": " + detail), bound_(std::move(bound)) {}

  const std::string& bound() const noexcept { return bound_; }

 private:
  std::string bound_;
};

// A numerical procedure failed: singular Jacobian, non-contracting fixed point,
// integrator defect above tolerance, exhausted iteration budget.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operands have incompatible dimensions or degree bounds.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace utori
