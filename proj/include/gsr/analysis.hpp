#pragma once

// Bounds and identities as executable checks, with randomized suites.

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "gsr/graph.hpp"

namespace gsr {

struct BoundReport {
  double p = 0.0;
  double q = 0.0;
  double epsilon = 0.0;
  double eta_smooth = 0.0;
  /// Bound on ||x0 - x||_2; present iff q < 2.
  std::optional<double> full_bound;
  /// Bound on ||(x0 - x)_U||_2 = (2p|eps| + 2|eta|) / (2 - q); present iff q < 2.
  std::optional<double> inaccessible_bound;
  /// M or U is empty; the empty block has norm 0 by convention.
  bool degenerate_mask = false;
};

/// p = ||[I_MM + A_MM; A_UM]||_2 and q = ||[A_MU; I_UU + A_UU]||_2.
BoundReport inpainting_bound(const GraphShift& shift, const IndexMask& mask, double epsilon, double eta_smooth);

struct BoundCheck {
  bool holds = false;
  double lhs = 0.0;  // ||(x0 - x)_U||_2
  double rhs = 0.0;
  BoundReport report;
};

/// epsilon = ||(x0 - t)_M||, eta = sqrt(S2(x0)). Throws BoundNotApplicable
/// when q >= 2.
BoundCheck verify_inpainting_bound(const GraphShift& shift, const IndexMask& mask, const Vector& x0, const Vector& t,
                                   const Vector& estimate);

/// sigma_i^2 ||(I - A) u_i||^2 over the thin SVD of X.
std::vector<double> tv_svd_terms(const SignalMatrix& x, const GraphShift& shift);

struct Inequality {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds(double slack = 1e-10) const { return lhs <= rhs + slack; }
};

/// S2(X) <= S2(U) ||X||_*^2 with U the left singular vectors of nonzero
/// singular values.
Inequality nuclear_tv_bound(const SignalMatrix& x, const GraphShift& shift);

/// S2(U a) <= S2(U) ||a||^2 for orthonormal columns U.
Inequality subspace_smoothness_bound(const Matrix& basis, const Vector& a, const GraphShift& shift);

// ---------------------------------------------------------------------------

struct KNormOperator {
  ComplexMatrix k;  // (I - L)^* V^* V (I - L)
  SpectralBasis basis;
  double eta = 0.0;
};

KNormOperator make_k_norm_operator(const GraphShift& shift, double eta = 0.0);

/// sqrt(a^* K a), clamped at zero.
double k_norm(const ComplexVector& a, const KNormOperator& op);

/// ||a||_K <= eta.
bool in_k_ball(const ComplexVector& a, const KNormOperator& op);

struct OutlierModel {
  std::vector<Eigen::Index> support;
  std::vector<double> magnitudes;

  std::size_t k() const { return support.size(); }
  void validate(Eigen::Index n) const;
  Vector to_vector(Eigen::Index n) const;
  /// Nonzeros of e.
  static OutlierModel from_vector(const Vector& e);
};

struct ResidualDecomposition {
  ComplexVector a0;     // V^-1 x0
  ComplexVector a_hat;  // V^-1 x_hat
  Vector smooth_part;   // V (a0 - a_hat), real part
  Vector outlier_part;  // sum b_i delta_i
  double mismatch = 0.0;  // ||e_hat - smooth_part - outlier_part||
};

/// e_hat = V (a0 - a_hat) + sum b_i delta_i where t = x0 + e0 and
/// e_hat = t - x_hat. Throws InconsistentInputs if e_hat is not t - x_hat or
/// the identity fails beyond 1e-8 (1 + ||e_hat||).
ResidualDecomposition residual_decomposition(const Vector& x0, const Vector& x_hat, const Vector& e_hat,
                                             const OutlierModel& outliers, const SpectralBasis& basis);

// ---------------------------------------------------------------------------
// Randomized suites. One row per draw; margin >= 0 means the check passed.

struct SuiteRow {
  std::uint64_t seed = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
};

struct SuiteOptions {
  int draws = 100;
  std::uint64_t seed = 0;
  Eigen::Index max_n = 30;
};

/// |S2(X) - sum of terms| against 1e-8 (1 + S2(X)).
std::vector<SuiteRow> tv_svd_suite(const SuiteOptions& opt);
std::vector<SuiteRow> nuclear_tv_suite(const SuiteOptions& opt);
std::vector<SuiteRow> subspace_suite(const SuiteOptions& opt);
/// Inpainting instances on symmetric shifts (q <= 2); draws with q >= 2 are
/// redrawn. Noisy smooth signals with inpaint_constrained estimates; every
/// fourth draw uses a non-smooth signal.
std::vector<SuiteRow> inpainting_suite(const SuiteOptions& opt);
/// k_norm(a)^2 against S2(V a) on directed shifts.
std::vector<SuiteRow> k_norm_suite(const SuiteOptions& opt);

void write_suite_csv(std::ostream& out, const std::vector<SuiteRow>& rows);

}  // namespace gsr
