#include <cmath>
#include <complex>

#include "doctest.h"
#include "gsr/analysis.hpp"
#include "gsr/solvers.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace gsr;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidArgument;
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

/// Undirected cycle (P + P^T) / 2; doubly stochastic.
GraphShift symmetric_cycle(Eigen::Index n) {
  const Matrix p = GraphShift::cycle(n).weights();
  return normalize_shift(GraphShift(0.5 * (p + p.transpose())));
}

}  // namespace

TEST_CASE("inpainting_bound on the 3-cycle") {
  const GraphShift a = GraphShift::cycle(3);
  const IndexMask mask = IndexMask::from_nodes(3, {0, 1});
  const BoundReport r = inpainting_bound(a, mask, 0.1, 0.2);
  // Columns of I + A are e0+e1, e1+e2, e2+e0; the M block has Gram [[2,1],[1,2]].
  CHECK(r.p == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(r.q == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  const Matrix ia = Matrix::Identity(3, 3) + a.weights();
  CHECK(r.p == doctest::Approx(spectral_norm(ia.leftCols(2))));
  CHECK(r.q == doctest::Approx(spectral_norm(ia.rightCols(1))));
  REQUIRE(r.inaccessible_bound.has_value());
  CHECK(*r.inaccessible_bound ==
        doctest::Approx((2 * std::sqrt(3.0) * 0.1 + 2 * 0.2) / (2 - std::sqrt(2.0))).epsilon(1e-12));
  CHECK(r.full_bound.has_value());
  CHECK_FALSE(r.degenerate_mask);
}

TEST_CASE("inpainting_bound: symmetric shifts and degenerate masks") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i) {
    const GraphShift a = test::random_symmetric_shift(rng, 12);
    const IndexMask m = test::random_node_mask(rng, 12, 6);
    CHECK(inpainting_bound(a, m, 0.0, 0.0).q <= 2.0 + 1e-12);
  }
  const GraphShift a = test::random_symmetric_shift(rng, 6);
  const BoundReport full = inpainting_bound(a, IndexMask::full(6, 1), 0.5, 0.0);
  CHECK(full.q == 0.0);
  CHECK(full.degenerate_mask);
  REQUIRE(full.inaccessible_bound.has_value());
  CHECK(*full.inaccessible_bound == doctest::Approx(full.p * 0.5));
  CHECK(inpainting_bound(a, IndexMask(6, 1), 0.5, 0.0).degenerate_mask);
}

TEST_CASE("verify_inpainting_bound") {
  const GraphShift a = symmetric_cycle(8);
  const IndexMask mask = IndexMask::from_nodes(8, {0, 1, 2, 4, 5, 6});
  const Vector x0 = Vector::Constant(8, 3.0);
  const Vector x = gtvm(x0, mask, a);
  const BoundCheck c = verify_inpainting_bound(a, mask, x0, x0, x);
  CHECK(c.report.q == doctest::Approx(std::sqrt(1.5)));
  CHECK(c.rhs == doctest::Approx(0.0));
  CHECK(c.lhs < 1e-12);
  CHECK((x - x0).norm() < 1e-12);
  CHECK(c.holds);

  // q >= 2: the bound says nothing.
  const GraphShift id = GraphShift::identity(3);
  CHECK(kind_of([&] {
          verify_inpainting_bound(id, IndexMask::from_nodes(3, {0}), Vector::Zero(3), Vector::Zero(3),
                                  Vector::Zero(3));
        }) == ErrorKind::BoundNotApplicable);
}

TEST_CASE("tv_svd_terms") {
  std::mt19937_64 rng(9);
  const GraphShift a = test::random_weighted_shift(rng, 20);
  double sum = 0.0;
  for (double t : tv_svd_terms(Matrix::Zero(20, 4), a)) sum += t;
  CHECK(sum == 0.0);

  const Vector u = test::random_matrix(rng, 20, 1).col(0).normalized();
  const Vector q = test::random_matrix(rng, 4, 1).col(0).normalized();
  const Matrix x = 2.5 * u * q.transpose();
  const auto terms = tv_svd_terms(x, a);
  const Matrix d = Matrix::Identity(20, 20) - a.weights();
  REQUIRE(!terms.empty());
  CHECK(terms[0] == doctest::Approx(6.25 * (d * u).squaredNorm()).epsilon(1e-10));
  for (std::size_t i = 1; i < terms.size(); ++i) CHECK(std::abs(terms[i]) < 1e-20);

  for (int i = 0; i < 10; ++i) {
    const Matrix xr = test::random_matrix(rng, 20, 8);
    double s = 0.0;
    for (double t : tv_svd_terms(xr, a)) s += t;
    const double direct = oracle::variation_by_loops(xr, a.weights());
    CHECK(std::abs(s - direct) <= 1e-8 * (1.0 + direct));
  }
}

TEST_CASE("nuclear_tv_bound") {
  std::mt19937_64 rng(10);
  const GraphShift a = test::random_weighted_shift(rng, 15);
  const Inequality zero = nuclear_tv_bound(Matrix::Zero(15, 6), a);
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs == 0.0);

  // Rank one: both sides are sigma^2 S2(u).
  const Vector u = test::smooth_basis(a, 1).col(0);
  const Vector q = test::random_matrix(rng, 6, 1).col(0).normalized();
  const Inequality tight = nuclear_tv_bound(3.0 * u * q.transpose(), a);
  CHECK(tight.lhs == doctest::Approx(tight.rhs).epsilon(1e-10));

  for (int i = 0; i < 100; ++i) CHECK(nuclear_tv_bound(test::random_matrix(rng, 15, 6), a).holds());
}

TEST_CASE("subspace_smoothness_bound") {
  std::mt19937_64 rng(11);
  const GraphShift a = test::random_weighted_shift(rng, 12);
  const Matrix basis = Eigen::HouseholderQR<Matrix>(test::random_matrix(rng, 12, 4)).householderQ() *
                       Matrix::Identity(12, 4);
  const Inequality z = subspace_smoothness_bound(basis, Vector::Zero(4), a);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);
  const Inequality one = subspace_smoothness_bound(basis.leftCols(1), Vector::Ones(1), a);
  CHECK(one.lhs == doctest::Approx(one.rhs).epsilon(1e-12));
  for (int i = 0; i < 100; ++i)
    CHECK(subspace_smoothness_bound(basis, test::random_matrix(rng, 4, 1).col(0), a).holds());
  CHECK(kind_of([&] { subspace_smoothness_bound(2.0 * basis, Vector::Ones(4), a); }) ==
        ErrorKind::NonOrthonormalBasis);
}

TEST_CASE("k_norm") {
  const KNormOperator id = make_k_norm_operator(GraphShift::identity(4));
  CHECK(id.k.norm() < 1e-12);
  CHECK(k_norm(ComplexVector::Ones(4), id) == doctest::Approx(0.0));

  const GraphShift cyc = GraphShift::cycle(3);
  const KNormOperator op = make_k_norm_operator(cyc, 0.5);
  CHECK((op.k - op.k.adjoint()).norm() < 1e-10);
  const Matrix d = Matrix::Identity(3, 3) - cyc.weights();
  for (Eigen::Index j = 0; j < 3; ++j) {
    ComplexVector a = ComplexVector::Zero(3);
    a(j) = 1.0;
    const ComplexVector x = op.basis.vectors * a;
    const double direct = (d.cast<std::complex<double>>() * x).norm();
    CHECK(k_norm(a, op) == doctest::Approx(direct).epsilon(1e-10));
    if (std::abs(op.basis.values(j) - 1.0) < 1e-10) {
      CHECK(k_norm(a, op) < 1e-10);
      CHECK(in_k_ball(a, op));
    }
  }
}

TEST_CASE("outlier model and residual decomposition") {
  OutlierModel bad{{1, 1}, {2.0, 3.0}};
  CHECK(kind_of([&] { bad.validate(5); }) == ErrorKind::InconsistentInputs);
  OutlierModel zero_mag{{1}, {0.0}};
  CHECK(kind_of([&] { zero_mag.validate(5); }) == ErrorKind::InconsistentInputs);

  std::mt19937_64 rng(12);
  const GraphShift a = test::random_weighted_shift(rng, 10);
  const SpectralBasis basis = spectral_decomposition(a);
  const Vector x0 = test::random_matrix(rng, 10, 1).col(0);
  const OutlierModel model{{2, 7}, {4.0, -6.0}};
  const Vector e0 = model.to_vector(10);
  CHECK(OutlierModel::from_vector(e0).support == model.support);

  const ResidualDecomposition exact = residual_decomposition(x0, x0, e0, model, basis);
  CHECK(exact.smooth_part.norm() < 1e-10);
  CHECK((exact.outlier_part - e0).norm() < 1e-12);

  const OutlierModel none;
  CHECK(residual_decomposition(x0, x0, Vector::Zero(10), none, basis).mismatch < 1e-10);

  for (int i = 0; i < 10; ++i) {
    const Vector xh = test::random_matrix(rng, 10, 1).col(0);
    const Vector eh = x0 + e0 - xh;
    CHECK(residual_decomposition(x0, xh, eh, model, basis).mismatch <= 1e-8 * (1.0 + eh.norm()));
  }
  CHECK(kind_of([&] { residual_decomposition(x0, x0, e0 + Vector::Ones(10), model, basis); }) ==
        ErrorKind::InconsistentInputs);
}

TEST_CASE("suites pass on a few draws") {
  SuiteOptions opt;
  opt.draws = 10;
  opt.seed = 3;
  for (auto fn : {tv_svd_suite, nuclear_tv_suite, subspace_suite, inpainting_suite, k_norm_suite}) {
    const auto rows = fn(opt);
    CHECK(rows.size() == 10);
    for (const auto& r : rows) CHECK(r.margin >= 0.0);
  }
}
