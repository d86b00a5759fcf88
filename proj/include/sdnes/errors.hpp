#pragma once

#include <stdexcept>
#include <string>

namespace sdnes {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration / invalid construction input.
struct InvalidArgument : Error {
  using Error::Error;
};

// Assumption 1 (strict diagonal dominance with positive diagonal) violated
// where an operation requires it.
struct AssumptionViolation : Error {
  using Error::Error;
};

// Linear solve refused: condition estimate beyond the trust limit.
struct SingularMatrix : Error {
  using Error::Error;
};

// The eigenvalue solver did not converge. Never silently mapped to a
// boolean stability verdict.
struct EigenSolverFailure : Error {
  using Error::Error;
};

// Gauss-Hermite node doubling failed to stabilize the integral.
struct QuadratureFailure : Error {
  using Error::Error;
};

// No deceptive gain in the stability preserving set achieves the
// requested reference payoffs.
struct NotAttainable : Error {
  using Error::Error;
};

}  // namespace sdnes
