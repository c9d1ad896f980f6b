#pragma once

// Graph representation and the variation functionals built on it.
//
// Orientation convention: A(n, m) is the weight of the edge from node m into
// node n, so (A x)[n] aggregates the neighbors of n. Signals are real; complex
// arithmetic only appears inside SpectralBasis.

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gsr/error.hpp"

namespace gsr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// N x L matrix of graph signals, one signal per column. L = 1 is a vector.
using SignalMatrix = Matrix;

/// Weighted adjacency matrix with its normalization state.
class GraphShift {
 public:
  /// Unnormalized shift. Throws on non-square, empty or non-finite input.
  explicit GraphShift(Matrix weights);

  /// Wraps a matrix that is claimed to already have unit spectral radius.
  /// The claim is checked to 1e-9.
  static GraphShift assume_normalized(Matrix weights);

  static GraphShift identity(Eigen::Index n);
  /// Directed cyclic permutation: (A x)[n] = x[n - 1 mod N].
  static GraphShift cycle(Eigen::Index n);

  Eigen::Index size() const noexcept { return weights_.rows(); }
  const Matrix& weights() const noexcept { return weights_; }
  bool normalized() const noexcept { return normalized_; }
  /// Spectral radius before scaling (only meaningful once normalized).
  double spectral_radius() const noexcept { return spectral_radius_; }

 private:
  GraphShift(Matrix weights, bool normalized, double radius);

  friend GraphShift normalize_shift(const GraphShift& shift);

  Matrix weights_;
  bool normalized_ = false;
  double spectral_radius_ = 0.0;
};

/// Set of accessible entries M of an N x L signal matrix; the complement is U.
class IndexMask {
 public:
  IndexMask() = default;
  IndexMask(Eigen::Index rows, Eigen::Index cols);

  static IndexMask full(Eigen::Index rows, Eigen::Index cols);
  /// Node mask (L = 1) with the listed rows accessible.
  static IndexMask from_nodes(Eigen::Index n, const std::vector<Eigen::Index>& nodes);
  static IndexMask from_entries(Eigen::Index rows, Eigen::Index cols,
                                const std::vector<std::pair<Eigen::Index, Eigen::Index>>& entries);

  Eigen::Index rows() const noexcept { return rows_; }
  Eigen::Index cols() const noexcept { return cols_; }

  bool accessible(Eigen::Index row, Eigen::Index col = 0) const;
  void set(Eigen::Index row, Eigen::Index col, bool value);

  std::size_t count() const noexcept;
  bool empty() const noexcept { return count() == 0; }
  bool is_full() const noexcept { return count() == static_cast<std::size_t>(rows_ * cols_); }

  /// Accessible entries in column-major order.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> entries() const;
  /// For node masks: accessible (M) and inaccessible (U) row indices, ascending.
  std::vector<Eigen::Index> accessible_nodes() const;
  std::vector<Eigen::Index> inaccessible_nodes() const;

  IndexMask complement() const;
  /// 0/1 matrix with ones on M.
  Matrix indicator() const;

  bool operator==(const IndexMask&) const = default;

 private:
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::vector<char> flags_;  // column-major
};

/// Eigendecomposition A = V diag(lambda) V^{-1}.
struct SpectralBasis {
  ComplexMatrix vectors;
  ComplexVector values;
  ComplexMatrix inverse;

  Eigen::Index size() const noexcept { return vectors.rows(); }
};

/// Spectral radius |lambda_max| of a square real matrix. Dense eigensolve up to
/// N = 2000, power iteration above.
double spectral_radius(const Matrix& a);

/// Scales A by 1 / |lambda_max|. Throws ZeroSpectralRadius below 1e-12.
GraphShift normalize_shift(const GraphShift& shift);

/// ||x - A x||_2^2 for a single signal.
double quadratic_variation(const Vector& x, const GraphShift& shift);

/// ||X - A X||_F^2, the column sum of quadratic_variation.
double matrix_variation(const SignalMatrix& x, const GraphShift& shift);

/// (I - A)^T (I - A).
Matrix tilde_shift(const GraphShift& shift);

/// Throws NotDiagonalizable when the eigenvector matrix has condition number
/// above 1e10 or the reconstruction residuals exceed their tolerances.
SpectralBasis spectral_decomposition(const GraphShift& shift);

ComplexVector gft(const Vector& x, const SpectralBasis& basis);
/// Real part of V x_hat; the imaginary part vanishes for spectra of real signals.
Vector igft(const ComplexVector& coefficients, const SpectralBasis& basis);

/// Blocks of a square matrix indexed by the accessible (M) and inaccessible (U)
/// nodes of a node mask, each in ascending node order.
struct BlockPartition {
  std::vector<Eigen::Index> m;
  std::vector<Eigen::Index> u;
  Matrix mm, mu, um, uu;
};

BlockPartition partition_blocks(const Matrix& mat, const IndexMask& mask);
/// Inverse of partition_blocks.
Matrix reassemble_blocks(const BlockPartition& blocks);

// Helpers shared by the solvers.
void require_normalized(const GraphShift& shift, const char* who);
void require_same_shape(const Matrix& a, const Matrix& b, const char* who);
void require_node_count(const Matrix& signal, const GraphShift& shift, const char* who);
void require_finite(const Matrix& m, const char* who);

}  // namespace gsr
