#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>

namespace pws {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched sizes (group dimension m, vector lengths, index ranges).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Problem size exceeds a configured cap.
class ResourceError : public Error {
 public:
  ResourceError(const std::string& what, long long requested, long long cap)
      : Error(what + " (requested " + std::to_string(requested) + ", cap " + std::to_string(cap) + ")"),
        requested_(requested),
        cap_(cap) {}
  long long requested() const { return requested_; }
  long long cap() const { return cap_; }

 private:
  long long requested_;
  long long cap_;
};

/// Iterative method failed to reach its tolerance; carries the best residual seen.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double best_residual)
      : Error(what + " (best residual " + std::to_string(best_residual) + ")"), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

/// The constrained minimizer is not unique: a nonzero vector vanishes on the
/// sample set and has zero seminorm. The witness is that vector.
class NonUniquenessError : public Error {
 public:
  NonUniquenessError(const std::string& what, Eigen::VectorXd witness)
      : Error(what), witness_(std::move(witness)) {}
  const Eigen::VectorXd& witness() const { return witness_; }

 private:
  Eigen::VectorXd witness_;
};

/// Hypothesis of an inequality check does not hold, so the check is vacuous.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Operator failed the bit-exact symmetry check.
class SymmetryError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or configuration.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace pws
