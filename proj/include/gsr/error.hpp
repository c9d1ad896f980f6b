#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gsr {

enum class ErrorKind {
  DimensionMismatch,
  NotNormalized,
  ZeroSpectralRadius,
  NotDiagonalizable,
  NegativeThreshold,
  NonFiniteObjective,
  SingularMatrix,
  EmptyAccessibleSet,
  Infeasible,
  BoundNotApplicable,
  NonOrthonormalBasis,
  InconsistentInputs,
  KTooLarge,
  DegenerateDistances,
  EmptyMask,
  EmptyGrid,
  NonSymmetricLaplacian,
  NonBinaryInput,
  InvalidArgument,
  Parse,
  Io,
  Config,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` classifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace gsr
