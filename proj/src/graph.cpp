#include "gsr/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace gsr {

namespace {

constexpr double kZeroRadius = 1e-12;
constexpr double kNormalizedTol = 1e-9;
constexpr Eigen::Index kDenseEigenLimit = 2000;
constexpr double kConditionLimit = 1e10;

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

double power_iteration_radius(const Matrix& a) {
  const Eigen::Index n = a.rows();
  // Deterministic start with no special alignment to sparse eigenvectors.
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(1.0 + static_cast<double>(i));
  x.normalize();
  double estimate = 0.0;
  double log_sum = 0.0;
  int window = 0;
  for (int it = 0; it < 10000; ++it) {
    Vector y = a * x;
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    if (it >= 9950) {
      log_sum += std::log(norm);
      ++window;
    }
    if (std::abs(norm - estimate) <= 1e-10 * norm) return norm;
    estimate = norm;
    x = y / norm;
  }
  // Oscillating iterates (several dominant eigenvalues): geometric mean of the
  // last growth factors.
  return std::exp(log_sum / window);
}

}  // namespace

GraphShift::GraphShift(Matrix weights) : GraphShift(std::move(weights), false, 0.0) {}

GraphShift::GraphShift(Matrix weights, bool normalized, double radius)
    : weights_(std::move(weights)), normalized_(normalized), spectral_radius_(radius) {
  require(weights_.rows() >= 1 && weights_.rows() == weights_.cols(), ErrorKind::DimensionMismatch,
          "graph shift must be square and non-empty, got " + shape(weights_));
  require_finite(weights_, "GraphShift");
}

GraphShift GraphShift::assume_normalized(Matrix weights) {
  GraphShift shift(std::move(weights));
  const double radius = gsr::spectral_radius(shift.weights_);
  require(std::abs(radius - 1.0) <= kNormalizedTol, ErrorKind::NotNormalized,
          "claimed normalized shift has spectral radius " + std::to_string(radius));
  shift.normalized_ = true;
  shift.spectral_radius_ = 1.0;
  return shift;
}

GraphShift GraphShift::identity(Eigen::Index n) { return GraphShift(Matrix::Identity(n, n), true, 1.0); }

GraphShift GraphShift::cycle(Eigen::Index n) {
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) a(i, (i + n - 1) % n) = 1.0;
  return GraphShift(std::move(a), true, 1.0);
}

// ---------------------------------------------------------------------------

IndexMask::IndexMask(Eigen::Index rows, Eigen::Index cols)
    : rows_(rows), cols_(cols), flags_(static_cast<std::size_t>(rows * cols), 0) {
  require(rows >= 0 && cols >= 0, ErrorKind::InvalidArgument, "negative mask dimensions");
}

IndexMask IndexMask::full(Eigen::Index rows, Eigen::Index cols) {
  IndexMask mask(rows, cols);
  std::fill(mask.flags_.begin(), mask.flags_.end(), 1);
  return mask;
}

IndexMask IndexMask::from_nodes(Eigen::Index n, const std::vector<Eigen::Index>& nodes) {
  IndexMask mask(n, 1);
  for (auto node : nodes) mask.set(node, 0, true);
  return mask;
}

IndexMask IndexMask::from_entries(Eigen::Index rows, Eigen::Index cols,
                                  const std::vector<std::pair<Eigen::Index, Eigen::Index>>& entries) {
  IndexMask mask(rows, cols);
  for (const auto& [r, c] : entries) mask.set(r, c, true);
  return mask;
}

bool IndexMask::accessible(Eigen::Index row, Eigen::Index col) const {
  require(row >= 0 && row < rows_ && col >= 0 && col < cols_, ErrorKind::InvalidArgument,
          "mask index (" + std::to_string(row) + "," + std::to_string(col) + ") out of range");
  return flags_[static_cast<std::size_t>(col * rows_ + row)] != 0;
}

void IndexMask::set(Eigen::Index row, Eigen::Index col, bool value) {
  require(row >= 0 && row < rows_ && col >= 0 && col < cols_, ErrorKind::InvalidArgument,
          "mask index (" + std::to_string(row) + "," + std::to_string(col) + ") out of range");
  flags_[static_cast<std::size_t>(col * rows_ + row)] = value ? 1 : 0;
}

std::size_t IndexMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), char{1}));
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> IndexMask::entries() const {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  out.reserve(count());
  for (Eigen::Index c = 0; c < cols_; ++c)
    for (Eigen::Index r = 0; r < rows_; ++r)
      if (flags_[static_cast<std::size_t>(c * rows_ + r)]) out.emplace_back(r, c);
  return out;
}

std::vector<Eigen::Index> IndexMask::accessible_nodes() const {
  require(cols_ == 1, ErrorKind::DimensionMismatch, "node mask expected (one column)");
  std::vector<Eigen::Index> out;
  for (Eigen::Index r = 0; r < rows_; ++r)
    if (flags_[static_cast<std::size_t>(r)]) out.push_back(r);
  return out;
}

std::vector<Eigen::Index> IndexMask::inaccessible_nodes() const {
  require(cols_ == 1, ErrorKind::DimensionMismatch, "node mask expected (one column)");
  std::vector<Eigen::Index> out;
  for (Eigen::Index r = 0; r < rows_; ++r)
    if (!flags_[static_cast<std::size_t>(r)]) out.push_back(r);
  return out;
}

IndexMask IndexMask::complement() const {
  IndexMask out(rows_, cols_);
  for (std::size_t i = 0; i < flags_.size(); ++i) out.flags_[i] = flags_[i] ? 0 : 1;
  return out;
}

Matrix IndexMask::indicator() const {
  Matrix out(rows_, cols_);
  for (Eigen::Index c = 0; c < cols_; ++c)
    for (Eigen::Index r = 0; r < rows_; ++r) out(r, c) = flags_[static_cast<std::size_t>(c * rows_ + r)];
  return out;
}

// ---------------------------------------------------------------------------

double spectral_radius(const Matrix& a) {
  require(a.rows() == a.cols(), ErrorKind::DimensionMismatch, "spectral radius of non-square matrix");
  if (a.rows() > kDenseEigenLimit) return power_iteration_radius(a);
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  require(solver.info() == Eigen::Success, ErrorKind::InvalidArgument, "eigenvalue computation failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

GraphShift normalize_shift(const GraphShift& shift) {
  const double radius = spectral_radius(shift.weights());
  require(radius >= kZeroRadius, ErrorKind::ZeroSpectralRadius,
          "spectral radius " + std::to_string(radius) + " is below 1e-12 (nilpotent shift)");
  return GraphShift(shift.weights() / radius, true, radius);
}

double quadratic_variation(const Vector& x, const GraphShift& shift) {
  return matrix_variation(x, shift);
}

double matrix_variation(const SignalMatrix& x, const GraphShift& shift) {
  require_normalized(shift, "matrix_variation");
  require_node_count(x, shift, "matrix_variation");
  return (x - shift.weights() * x).squaredNorm();
}

Matrix tilde_shift(const GraphShift& shift) {
  require_normalized(shift, "tilde_shift");
  const Matrix d = Matrix::Identity(shift.size(), shift.size()) - shift.weights();
  Matrix out = d.transpose() * d;
  // Exact symmetry; the product is symmetric only up to rounding.
  return 0.5 * (out + out.transpose());
}

SpectralBasis spectral_decomposition(const GraphShift& shift) {
  const Matrix& a = shift.weights();
  const Eigen::Index n = a.rows();
  Eigen::EigenSolver<Matrix> solver(a);
  require(solver.info() == Eigen::Success, ErrorKind::NotDiagonalizable, "eigen decomposition failed");

  SpectralBasis basis;
  basis.values = solver.eigenvalues();
  basis.vectors = solver.eigenvectors();

  Eigen::JacobiSVD<ComplexMatrix> svd(basis.vectors);
  const auto& sv = svd.singularValues();
  const double smallest = sv[sv.size() - 1];
  require(smallest > 0.0 && sv[0] / smallest <= kConditionLimit, ErrorKind::NotDiagonalizable,
          "eigenvector matrix is ill-conditioned (defective shift)");

  basis.inverse = basis.vectors.fullPivLu().inverse();

  const ComplexMatrix rebuilt = basis.vectors * basis.values.asDiagonal() * basis.inverse;
  const double scale = a.norm();
  require((rebuilt - a.cast<std::complex<double>>()).norm() <= 1e-8 * std::max(scale, 1e-300) + 1e-300,
          ErrorKind::NotDiagonalizable, "reconstruction V diag(lambda) V^-1 does not match the shift");
  const double identity_error =
      (basis.vectors * basis.inverse - ComplexMatrix::Identity(n, n)).norm();
  require(identity_error <= 1e-8 * std::sqrt(static_cast<double>(n)), ErrorKind::NotDiagonalizable,
          "inverse eigenvector matrix is inaccurate");
  return basis;
}

ComplexVector gft(const Vector& x, const SpectralBasis& basis) {
  require(x.size() == basis.size(), ErrorKind::DimensionMismatch, "gft: signal length does not match basis");
  return basis.inverse * x.cast<std::complex<double>>();
}

Vector igft(const ComplexVector& coefficients, const SpectralBasis& basis) {
  require(coefficients.size() == basis.size(), ErrorKind::DimensionMismatch,
          "igft: coefficient length does not match basis");
  return (basis.vectors * coefficients).real();
}

// ---------------------------------------------------------------------------

BlockPartition partition_blocks(const Matrix& mat, const IndexMask& mask) {
  require(mat.rows() == mat.cols() && mat.rows() == mask.rows() && mask.cols() == 1,
          ErrorKind::DimensionMismatch, "partition_blocks needs a square matrix and a node mask of equal size");
  BlockPartition b;
  b.m = mask.accessible_nodes();
  b.u = mask.inaccessible_nodes();
  b.mm = mat(b.m, b.m);
  b.mu = mat(b.m, b.u);
  b.um = mat(b.u, b.m);
  b.uu = mat(b.u, b.u);
  return b;
}

Matrix reassemble_blocks(const BlockPartition& b) {
  const auto n = static_cast<Eigen::Index>(b.m.size() + b.u.size());
  Matrix out(n, n);
  out(b.m, b.m) = b.mm;
  out(b.m, b.u) = b.mu;
  out(b.u, b.m) = b.um;
  out(b.u, b.u) = b.uu;
  return out;
}

// ---------------------------------------------------------------------------

void require_normalized(const GraphShift& shift, const char* who) {
  require(shift.normalized(), ErrorKind::NotNormalized, std::string(who) + ": graph shift is not normalized");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* who) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::DimensionMismatch,
          std::string(who) + ": shapes " + shape(a) + " and " + shape(b) + " differ");
}

void require_node_count(const Matrix& signal, const GraphShift& shift, const char* who) {
  require(signal.rows() == shift.size(), ErrorKind::DimensionMismatch,
          std::string(who) + ": signal has " + std::to_string(signal.rows()) + " rows, graph has " +
              std::to_string(shift.size()) + " nodes");
}

void require_finite(const Matrix& m, const char* who) {
  require(m.allFinite(), ErrorKind::InvalidArgument, std::string(who) + ": non-finite entries");
}

}  // namespace gsr
