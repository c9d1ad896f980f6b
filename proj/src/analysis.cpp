#include "gsr/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "gsr/data.hpp"
#include "gsr/prox.hpp"
#include "gsr/random.hpp"
#include "gsr/solvers.hpp"

namespace gsr {

namespace {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()[0];
}

Vector restrict(const Vector& x, const std::vector<Eigen::Index>& idx) { return x(idx); }

}  // namespace

BoundReport inpainting_bound(const GraphShift& shift, const IndexMask& mask, double epsilon, double eta_smooth) {
  require_normalized(shift, "inpainting_bound");
  require(mask.cols() == 1 && mask.rows() == shift.size(), ErrorKind::DimensionMismatch,
          "inpainting_bound: expected a node mask over the graph");
  const Eigen::Index n = shift.size();
  const Matrix b = Matrix::Identity(n, n) + shift.weights();
  const auto m = mask.accessible_nodes();
  const auto u = mask.inaccessible_nodes();

  BoundReport r;
  r.epsilon = epsilon;
  r.eta_smooth = eta_smooth;
  r.p = spectral_norm(b(Eigen::all, m));
  r.q = spectral_norm(b(Eigen::all, u));
  r.degenerate_mask = m.empty() || u.empty();
  if (r.q < 2.0) {
    const double inacc = (2.0 * r.p * std::abs(epsilon) + 2.0 * std::abs(eta_smooth)) / (2.0 - r.q);
    r.inaccessible_bound = inacc;
    r.full_bound = 0.5 * r.q * inacc + r.p * std::abs(epsilon) + std::abs(eta_smooth);
  }
  return r;
}

BoundCheck verify_inpainting_bound(const GraphShift& shift, const IndexMask& mask, const Vector& x0, const Vector& t,
                                   const Vector& estimate) {
  require_node_count(x0, shift, "verify_inpainting_bound");
  require(t.size() == x0.size() && estimate.size() == x0.size(), ErrorKind::DimensionMismatch,
          "verify_inpainting_bound: signal lengths differ");
  const auto m = mask.accessible_nodes();
  const auto u = mask.inaccessible_nodes();
  const double eps = (restrict(x0, m) - restrict(t, m)).norm();
  const double eta = std::sqrt(quadratic_variation(x0, shift));
  BoundCheck c;
  c.report = inpainting_bound(shift, mask, eps, eta);
  require(c.report.inaccessible_bound.has_value(), ErrorKind::BoundNotApplicable,
          "q = " + std::to_string(c.report.q) + " is not below 2");
  c.lhs = (restrict(x0, u) - restrict(estimate, u)).norm();
  c.rhs = *c.report.inaccessible_bound;
  c.holds = c.lhs <= c.rhs + 1e-12 * (1.0 + c.rhs);
  return c;
}

std::vector<double> tv_svd_terms(const SignalMatrix& x, const GraphShift& shift) {
  require_normalized(shift, "tv_svd_terms");
  require_node_count(x, shift, "tv_svd_terms");
  const ThinSvd svd = stable_svd(x);
  const Matrix d = Matrix::Identity(shift.size(), shift.size()) - shift.weights();
  std::vector<double> terms;
  for (Eigen::Index i = 0; i < svd.sigma.size(); ++i)
    terms.push_back(svd.sigma[i] * svd.sigma[i] * (d * svd.u.col(i)).squaredNorm());
  return terms;
}

Inequality nuclear_tv_bound(const SignalMatrix& x, const GraphShift& shift) {
  require_normalized(shift, "nuclear_tv_bound");
  require_node_count(x, shift, "nuclear_tv_bound");
  const ThinSvd svd = stable_svd(x);
  Eigen::Index rank = 0;
  const double top = svd.sigma.size() ? svd.sigma[0] : 0.0;
  while (rank < svd.sigma.size() && svd.sigma[rank] > 1e-12 * top) ++rank;
  Inequality r;
  r.lhs = matrix_variation(x, shift);
  const double nuclear = svd.sigma.head(rank).sum();
  r.rhs = rank ? matrix_variation(svd.u.leftCols(rank), shift) * nuclear * nuclear : 0.0;
  return r;
}

Inequality subspace_smoothness_bound(const Matrix& basis, const Vector& a, const GraphShift& shift) {
  require_normalized(shift, "subspace_smoothness_bound");
  require_node_count(basis, shift, "subspace_smoothness_bound");
  require(a.size() == basis.cols(), ErrorKind::DimensionMismatch, "coefficient count differs from the basis size");
  const Matrix gram = basis.transpose() * basis;
  require((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <= 1e-8,
          ErrorKind::NonOrthonormalBasis, "basis columns are not orthonormal within 1e-8");
  return {quadratic_variation(basis * a, shift), matrix_variation(basis, shift) * a.squaredNorm()};
}

// ---------------------------------------------------------------------------

KNormOperator make_k_norm_operator(const GraphShift& shift, double eta) {
  require(eta >= 0.0 && std::isfinite(eta), ErrorKind::InvalidArgument, "eta must be nonnegative");
  KNormOperator op;
  op.basis = spectral_decomposition(shift);
  op.eta = eta;
  const ComplexVector damp = ComplexVector::Ones(op.basis.size()) - op.basis.values;
  const ComplexMatrix vd = op.basis.vectors * damp.asDiagonal();
  const ComplexMatrix k = vd.adjoint() * vd;
  op.k = 0.5 * (k + k.adjoint());
  return op;
}

double k_norm(const ComplexVector& a, const KNormOperator& op) {
  require(a.size() == op.k.rows(), ErrorKind::DimensionMismatch, "k_norm: coefficient length differs from K");
  const double v = (a.adjoint() * op.k * a)(0, 0).real();
  return std::sqrt(std::max(v, 0.0));
}

bool in_k_ball(const ComplexVector& a, const KNormOperator& op) { return k_norm(a, op) <= op.eta; }

void OutlierModel::validate(Eigen::Index n) const {
  require(support.size() == magnitudes.size(), ErrorKind::InconsistentInputs,
          "outlier support and magnitudes differ in length");
  require(static_cast<Eigen::Index>(support.size()) <= n, ErrorKind::InconsistentInputs, "more outliers than nodes");
  std::set<Eigen::Index> seen;
  for (std::size_t i = 0; i < support.size(); ++i) {
    require(support[i] >= 0 && support[i] < n, ErrorKind::InconsistentInputs, "outlier index out of range");
    require(seen.insert(support[i]).second, ErrorKind::InconsistentInputs, "repeated outlier index");
    require(std::isfinite(magnitudes[i]) && magnitudes[i] != 0.0, ErrorKind::InconsistentInputs,
            "outlier magnitudes must be finite and nonzero");
  }
}

Vector OutlierModel::to_vector(Eigen::Index n) const {
  validate(n);
  Vector e = Vector::Zero(n);
  for (std::size_t i = 0; i < support.size(); ++i) e[support[i]] = magnitudes[i];
  return e;
}

OutlierModel OutlierModel::from_vector(const Vector& e) {
  OutlierModel m;
  for (Eigen::Index i = 0; i < e.size(); ++i)
    if (e[i] != 0.0) {
      m.support.push_back(i);
      m.magnitudes.push_back(e[i]);
    }
  return m;
}

ResidualDecomposition residual_decomposition(const Vector& x0, const Vector& x_hat, const Vector& e_hat,
                                             const OutlierModel& outliers, const SpectralBasis& basis) {
  const Eigen::Index n = x0.size();
  require(x_hat.size() == n && e_hat.size() == n && basis.size() == n, ErrorKind::DimensionMismatch,
          "residual_decomposition: sizes differ");
  const Vector t = x0 + outliers.to_vector(n);
  const double scale = 1e-8 * (1.0 + e_hat.norm());
  require((e_hat - (t - x_hat)).norm() <= scale, ErrorKind::InconsistentInputs,
          "e_hat differs from t - x_hat");

  ResidualDecomposition r;
  r.a0 = gft(x0, basis);
  r.a_hat = gft(x_hat, basis);
  r.smooth_part = igft(r.a0 - r.a_hat, basis);
  r.outlier_part = outliers.to_vector(n);
  r.mismatch = (e_hat - r.smooth_part - r.outlier_part).norm();
  require(r.mismatch <= scale, ErrorKind::InconsistentInputs,
          "outlier decomposition fails by " + std::to_string(r.mismatch));
  return r;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t draw_seed(std::uint64_t base, int i) { return splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(i))); }

Eigen::Index draw_size(Rng& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

Matrix orthonormal_columns(Rng& rng, Eigen::Index n, Eigen::Index r) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(rng, n, r));
  return qr.householderQ() * Matrix::Identity(n, r);
}

}  // namespace

std::vector<SuiteRow> tv_svd_suite(const SuiteOptions& opt) {
  std::vector<SuiteRow> rows;
  for (int i = 0; i < opt.draws; ++i) {
    SuiteRow row{draw_seed(opt.seed, i)};
    Rng rng(row.seed);
    const Eigen::Index n = draw_size(rng, 3, opt.max_n);
    const Eigen::Index l = draw_size(rng, 1, opt.max_n);
    const GraphShift a = random_shift(rng, n, 0.3, rng.uniform() < 0.5);
    const Matrix x = gaussian(rng, n, l);
    row.lhs = matrix_variation(x, a);
    const auto terms = tv_svd_terms(x, a);
    row.rhs = 0.0;
    for (double v : terms) row.rhs += v;
    row.margin = 1e-8 * (1.0 + row.lhs) - std::abs(row.lhs - row.rhs);
    rows.push_back(row);
  }
  return rows;
}

std::vector<SuiteRow> nuclear_tv_suite(const SuiteOptions& opt) {
  std::vector<SuiteRow> rows;
  for (int i = 0; i < opt.draws; ++i) {
    SuiteRow row{draw_seed(opt.seed, i)};
    Rng rng(row.seed);
    const Eigen::Index n = draw_size(rng, 2, opt.max_n);
    const Eigen::Index l = draw_size(rng, 1, opt.max_n);
    const Eigen::Index r = draw_size(rng, 1, std::min(n, l));
    const GraphShift a = random_shift(rng, n, 0.3, rng.uniform() < 0.5);
    const Matrix x = gaussian(rng, n, r) * gaussian(rng, r, l);
    const Inequality ineq = nuclear_tv_bound(x, a);
    row.lhs = ineq.lhs;
    row.rhs = ineq.rhs;
    row.margin = row.rhs + 1e-10 - row.lhs;
    rows.push_back(row);
  }
  return rows;
}

std::vector<SuiteRow> subspace_suite(const SuiteOptions& opt) {
  std::vector<SuiteRow> rows;
  for (int i = 0; i < opt.draws; ++i) {
    SuiteRow row{draw_seed(opt.seed, i)};
    Rng rng(row.seed);
    const Eigen::Index n = draw_size(rng, 2, opt.max_n);
    const Eigen::Index r = draw_size(rng, 1, n);
    const GraphShift a = random_shift(rng, n, 0.3, rng.uniform() < 0.5);
    const Inequality ineq = subspace_smoothness_bound(orthonormal_columns(rng, n, r), gaussian(rng, r, 1), a);
    row.lhs = ineq.lhs;
    row.rhs = ineq.rhs;
    row.margin = row.rhs + 1e-10 - row.lhs;
    rows.push_back(row);
  }
  return rows;
}

std::vector<SuiteRow> inpainting_suite(const SuiteOptions& opt) {
  std::vector<SuiteRow> rows;
  const Eigen::Index n = opt.max_n;
  for (int i = 0; i < opt.draws; ++i) {
    for (int attempt = 0;; ++attempt) {
      require(attempt < 100, ErrorKind::Infeasible, "could not draw an instance with q < 2");
      SuiteRow row{draw_seed(opt.seed, i * 100 + attempt)};
      Rng rng(row.seed);
      const GraphShift a = random_shift(rng, n, 0.3, true);
      std::vector<Eigen::Index> nodes;
      for (std::size_t k : rng.sample(static_cast<std::size_t>(n), static_cast<std::size_t>(n / 2)))
        nodes.push_back(static_cast<Eigen::Index>(k));
      const IndexMask mask = IndexMask::from_nodes(n, nodes);
      if (inpainting_bound(a, mask, 0.0, 0.0).q >= 2.0) continue;

      Vector x0;
      if (i % 4 == 3) {
        x0 = gaussian(rng, n, 1);
      } else {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(tilde_shift(a));
        x0 = std::sqrt(static_cast<double>(n)) * eig.eigenvectors().leftCols(3) * gaussian(rng, 3, 1);
      }
      const double sigma = 0.02 + 0.1 * rng.uniform();
      Vector t = Vector::Zero(n);
      for (auto m : nodes) t[m] = x0[m] + sigma * rng.normal();
      const double eps = (restrict(x0, nodes) - restrict(t, nodes)).norm();
      const Vector estimate = inpaint_constrained(t, mask, a, eps);
      const BoundCheck check = verify_inpainting_bound(a, mask, x0, t, estimate);
      row.lhs = check.lhs;
      row.rhs = check.rhs;
      row.margin = check.rhs - check.lhs;
      rows.push_back(row);
      break;
    }
  }
  return rows;
}

std::vector<SuiteRow> k_norm_suite(const SuiteOptions& opt) {
  std::vector<SuiteRow> rows;
  for (int i = 0; i < opt.draws; ++i) {
    SuiteRow row{draw_seed(opt.seed, i)};
    Rng rng(row.seed);
    const Eigen::Index n = draw_size(rng, 3, opt.max_n);
    const GraphShift a = random_shift(rng, n, 0.3, false);
    const KNormOperator op = make_k_norm_operator(a);
    const Vector x = gaussian(rng, n, 1);
    const double k = k_norm(gft(x, op.basis), op);
    row.lhs = k * k;
    row.rhs = quadratic_variation(x, a);
    row.margin = 1e-8 * (1.0 + row.rhs) - std::abs(row.lhs - row.rhs);
    rows.push_back(row);
  }
  return rows;
}

void write_suite_csv(std::ostream& out, const std::vector<SuiteRow>& rows) {
  out << "seed,lhs,rhs,margin\n" << std::setprecision(17);
  for (const auto& r : rows) out << r.seed << ',' << r.lhs << ',' << r.rhs << ',' << r.margin << '\n';
}

}  // namespace gsr
