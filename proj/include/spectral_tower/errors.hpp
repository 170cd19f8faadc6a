#pragma once

#include <stdexcept>
#include <string>

namespace spectral_tower {

/// Bad input: malformed files, violated preconditions, inconsistent geometry.
/// The command-line front end maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to deliver its contract (exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sparse factorization broke down; callers may retry with a perturbed shift.
class FactorizationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The tracked eigenbranch could not be identified in the search window.
class BranchLostError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// No eigenvalue at all inside the tracking window.
class EmptyWindowError : public BranchLostError {
 public:
  using BranchLostError::BranchLostError;
};

}  // namespace spectral_tower
