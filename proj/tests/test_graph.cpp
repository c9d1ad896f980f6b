#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "gsr/graph.hpp"
#include "support.hpp"

using namespace gsr;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected gsr::Error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("normalize_shift scales by the spectral radius") {
  const GraphShift scaled = normalize_shift(GraphShift(2.0 * Matrix::Identity(3, 3)));
  CHECK(scaled.normalized());
  CHECK(scaled.spectral_radius() == doctest::Approx(2.0));
  CHECK((scaled.weights() - Matrix::Identity(3, 3)).norm() < 1e-14);

  const GraphShift cycle = GraphShift::cycle(3);
  const GraphShift renorm = normalize_shift(GraphShift(cycle.weights()));
  CHECK((renorm.weights() - cycle.weights()).norm() < 1e-12);
  CHECK(renorm.spectral_radius() == doctest::Approx(1.0));

  Matrix nilpotent(2, 2);
  nilpotent << 0, 2, 0, 0;
  CHECK(kind_of([&] { normalize_shift(GraphShift(nilpotent)); }) == ErrorKind::ZeroSpectralRadius);
}

TEST_CASE("normalized shifts have unit spectral radius") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const GraphShift a = test::random_weighted_shift(rng, 12);
    CHECK(std::abs(spectral_radius(a.weights()) - 1.0) < 1e-9);
  }
}

TEST_CASE("power iteration path for large shifts") {
  // Above the dense limit the radius comes from power iteration.
  const Eigen::Index n = 2100;
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, (i + 1) % n) = 1.5;
    a(i, (i + 2) % n) = 1.5;
  }
  // Row sums are 3 and the matrix is nonnegative and irreducible: radius 3.
  CHECK(spectral_radius(a) == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("assume_normalized checks its claim") {
  CHECK_NOTHROW(GraphShift::assume_normalized(GraphShift::cycle(4).weights()));
  CHECK(kind_of([] { GraphShift::assume_normalized(2.0 * Matrix::Identity(2, 2)); }) == ErrorKind::NotNormalized);
  CHECK(kind_of([] { GraphShift(Matrix(2, 3)); }) == ErrorKind::DimensionMismatch);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = std::nan("");
  CHECK(kind_of([&] { GraphShift{bad}; }) == ErrorKind::InvalidArgument);
}

TEST_CASE("quadratic_variation examples") {
  const GraphShift cycle = GraphShift::cycle(3);
  CHECK(quadratic_variation(Vector::Ones(3), cycle) == doctest::Approx(0.0));
  Vector impulse = Vector::Zero(3);
  impulse[0] = 1.0;
  CHECK(quadratic_variation(impulse, cycle) == doctest::Approx(2.0));

  std::mt19937_64 rng(1);
  const Vector x = test::random_matrix(rng, 5, 1);
  CHECK(quadratic_variation(x, GraphShift::identity(5)) == 0.0);

  CHECK(kind_of([&] { quadratic_variation(Vector::Ones(4), cycle); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([&] { quadratic_variation(Vector::Ones(2), GraphShift(2.0 * Matrix::Identity(2, 2))); }) ==
        ErrorKind::NotNormalized);
}

TEST_CASE("matrix_variation is the column sum") {
  std::mt19937_64 rng(3);
  const GraphShift a = test::random_regular_shift(rng, 5, 3);
  const Vector x = test::random_matrix(rng, 5, 1);
  Matrix twice(5, 2);
  twice << x, x;
  CHECK(matrix_variation(twice, a) == doctest::Approx(2.0 * quadratic_variation(x, a)).epsilon(1e-14));
  CHECK(matrix_variation(Matrix::Zero(5, 3), a) == 0.0);

  for (int trial = 0; trial < 50; ++trial) {
    const GraphShift g = test::random_regular_shift(rng, 5, 3);
    const Matrix m = test::random_matrix(rng, 5, 3);
    double oracle = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const Vector col = m.col(c);
      const Vector diff = col - g.weights() * col;
      for (Eigen::Index i = 0; i < diff.size(); ++i) oracle += diff[i] * diff[i];
    }
    CHECK(std::abs(matrix_variation(m, g) - oracle) <= 1e-12 * std::max(1.0, oracle));
  }
}

TEST_CASE("constant signals have zero variation on row-stochastic shifts") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const GraphShift g = test::random_regular_shift(rng, 9, 3);
    CHECK(quadratic_variation(Vector::Constant(9, -2.5), g) < 1e-24);
  }
}

TEST_CASE("tilde_shift") {
  CHECK(tilde_shift(GraphShift::identity(4)).norm() == 0.0);

  const GraphShift cycle = GraphShift::cycle(3);
  const Matrix& p = cycle.weights();
  const Matrix expected = 2.0 * Matrix::Identity(3, 3) - p - p.transpose();
  CHECK((tilde_shift(cycle) - expected).norm() < 1e-15);

  std::mt19937_64 rng(5);
  const GraphShift sym = test::random_symmetric_shift(rng, 8);
  const Matrix d = Matrix::Identity(8, 8) - sym.weights();
  CHECK((tilde_shift(sym) - d * d).norm() < 1e-12);

  for (int trial = 0; trial < 30; ++trial) {
    const Matrix t = tilde_shift(test::random_weighted_shift(rng, 10));
    CHECK((t - t.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(t);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("spectral_decomposition") {
  const SpectralBasis id = spectral_decomposition(GraphShift::identity(3));
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(id.values[i] - 1.0) < 1e-14);

  const SpectralBasis cyc = spectral_decomposition(GraphShift::cycle(3));
  for (Eigen::Index i = 0; i < 3; ++i) {
    const std::complex<double> lambda = cyc.values[i];
    CHECK(std::abs(lambda * lambda * lambda - 1.0) < 1e-12);
  }
  // The three roots are distinct.
  CHECK(std::abs(cyc.values[0] - cyc.values[1]) > 0.5);
  CHECK(std::abs(cyc.values[1] - cyc.values[2]) > 0.5);
  CHECK(std::abs(cyc.values[0] - cyc.values[2]) > 0.5);

  Matrix jordan(2, 2);
  jordan << 1, 1, 0, 1;
  CHECK(kind_of([&] { spectral_decomposition(GraphShift(jordan)); }) == ErrorKind::NotDiagonalizable);
}

TEST_CASE("spectral basis invariants on random directed shifts") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const GraphShift g = test::random_weighted_shift(rng, 15);
    const SpectralBasis b = spectral_decomposition(g);
    const ComplexMatrix rebuilt = b.vectors * b.values.asDiagonal() * b.inverse;
    CHECK((rebuilt - g.weights().cast<std::complex<double>>()).norm() <= 1e-8 * g.weights().norm());
    CHECK((b.vectors * b.inverse - ComplexMatrix::Identity(15, 15)).norm() <= 1e-8 * std::sqrt(15.0));
  }
}

TEST_CASE("gft and igft") {
  const SpectralBasis id = spectral_decomposition(GraphShift::identity(3));
  Vector x(3);
  x << 1.0, -2.0, 0.5;
  const ComplexVector xt = gft(x, id);
  CHECK((xt.real() - x).norm() < 1e-14);
  CHECK(xt.imag().norm() < 1e-14);

  const SpectralBasis cyc = spectral_decomposition(GraphShift::cycle(3));
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector v = test::random_matrix(rng, 3, 1);
    CHECK((igft(gft(v, cyc), cyc) - v).norm() <= 1e-9 * v.norm());
  }

  // The eigenvector for lambda = 1 of the cycle is real (constant).
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < 3; ++i)
    if (std::abs(cyc.values[i] - 1.0) < 1e-9) k = i;
  const Vector v0 = cyc.vectors.col(k).real();
  const ComplexVector coeffs = gft(v0, cyc);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(coeffs[i] - (i == k ? 1.0 : 0.0)) < 1e-12);

  CHECK(kind_of([&] { gft(Vector::Ones(4), cyc); }) == ErrorKind::DimensionMismatch);
  CHECK(kind_of([&] { igft(ComplexVector::Ones(2), cyc); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("gft round trip on random directed shifts") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const GraphShift g = test::random_weighted_shift(rng, 20);
    const SpectralBasis b = spectral_decomposition(g);
    const Vector v = test::random_matrix(rng, 20, 1);
    CHECK((igft(gft(v, b), b) - v).norm() <= 1e-9 * v.norm());
  }
}

TEST_CASE("partition_blocks") {
  Matrix m(3, 3);
  m << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const BlockPartition b = partition_blocks(m, IndexMask::from_nodes(3, {0}));
  CHECK(b.mm.rows() == 1);
  CHECK(b.mm.cols() == 1);
  CHECK(b.mu.rows() == 1);
  CHECK(b.mu.cols() == 2);
  CHECK(b.um.rows() == 2);
  CHECK(b.um.cols() == 1);
  CHECK(b.uu.rows() == 2);
  CHECK(b.uu.cols() == 2);
  CHECK(b.mu(0, 1) == 3);
  CHECK(b.um(1, 0) == 7);

  const BlockPartition all = partition_blocks(m, IndexMask::full(3, 1));
  CHECK(all.mm == m);
  CHECK(all.mu.size() == 0);
  CHECK(all.um.size() == 0);
  CHECK(all.uu.size() == 0);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix r = test::random_matrix(rng, 7, 7);
    const IndexMask mask = test::random_node_mask(rng, 7, trial % 8);
    CHECK(reassemble_blocks(partition_blocks(r, mask)) == r);
  }
}

TEST_CASE("IndexMask basics") {
  IndexMask mask = IndexMask::from_entries(3, 2, {{0, 0}, {2, 1}});
  CHECK(mask.count() == 2);
  CHECK(mask.accessible(2, 1));
  CHECK_FALSE(mask.accessible(1, 1));
  const IndexMask comp = mask.complement();
  CHECK(comp.count() == 4);
  for (const auto& [r, c] : mask.entries()) CHECK_FALSE(comp.accessible(r, c));
  CHECK(kind_of([&] { mask.set(3, 0, true); }) == ErrorKind::InvalidArgument);
  CHECK(IndexMask::full(2, 2).is_full());
}
