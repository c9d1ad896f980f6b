#include "gsr/error.hpp"

namespace gsr {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::ZeroSpectralRadius: return "ZeroSpectralRadius";
    case ErrorKind::NotDiagonalizable: return "NotDiagonalizable";
    case ErrorKind::NegativeThreshold: return "NegativeThreshold";
    case ErrorKind::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::EmptyAccessibleSet: return "EmptyAccessibleSet";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::BoundNotApplicable: return "BoundNotApplicable";
    case ErrorKind::NonOrthonormalBasis: return "NonOrthonormalBasis";
    case ErrorKind::InconsistentInputs: return "InconsistentInputs";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::DegenerateDistances: return "DegenerateDistances";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::NonSymmetricLaplacian: return "NonSymmetricLaplacian";
    case ErrorKind::NonBinaryInput: return "NonBinaryInput";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace gsr
