#pragma once

// Proximal operators, the mask projection, backtracking line search and the
// regularized linear solves shared by every solver.

#include <functional>
#include <vector>

#include "gsr/graph.hpp"

namespace gsr {

/// Armijo backtracking parameters.
struct StepSearchConfig {
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  int max_halvings = 50;

  void validate() const;
};

/// Elementwise soft threshold. |x| == tau maps to zero.
SignalMatrix shrink(const SignalMatrix& x, double tau);

/// Singular value soft threshold U shrink(S, tau) Q^T.
SignalMatrix svt(const SignalMatrix& x, double tau);

/// Thin SVD with the sign convention used by svt: the first nonzero component
/// of each left singular vector is nonnegative.
struct ThinSvd {
  Matrix u;
  Vector sigma;
  Matrix v;
};
ThinSvd stable_svd(const Matrix& x);

double nuclear_norm(const Matrix& x);

/// T on M, X on U.
SignalMatrix project_mask(const SignalMatrix& x, const SignalMatrix& t, const IndexMask& mask);

struct StepResult {
  double step = 0.0;
  Matrix point;
  bool hit_limit = false;  // no step satisfied Armijo; smallest tried step returned
};

using Objective = std::function<double(const Matrix&)>;
using Gradient = std::function<Matrix(const Matrix&)>;

/// Armijo rule f(x - t g) <= f(x) - c t ||g||^2 with t shrinking from t0.
StepResult backtrack(const Objective& f, const Gradient& grad, const Matrix& x, const StepSearchConfig& cfg);

enum class SolveMode { Exact, Pseudoinverse };

/// Solves H y = b for symmetric PSD H. Pseudoinverse mode drops eigenvalues
/// below 1e-10 of the largest and returns the minimum-norm solution.
Matrix regularized_solve(const Matrix& h, const Matrix& b, SolveMode mode);

// ---------------------------------------------------------------------------
// Composite minimization F(x) = f(x) + g(x) by proximal gradient.

struct CompositeProblem {
  Objective smooth;
  Gradient gradient;
  Objective nonsmooth;
  /// prox(y, t): argmin_z g(z) + ||z - y||^2 / (2t), possibly followed by a
  /// projection onto the feasible set.
  std::function<Matrix(const Matrix&, double)> prox;
};

struct ProxGradientOptions {
  StepSearchConfig step;
  double tolerance = 1e-8;
  int max_iterations = 5000;
};

struct ProxGradientResult {
  Matrix x;
  std::vector<double> trace;  // F after each iteration
  int iterations = 0;
  bool converged = false;
  bool line_search_exhausted = false;
};

/// Each step backtracks until the quadratic upper bound on f holds and F does
/// not increase. Stops when consecutive objectives differ by less than the
/// tolerance.
ProxGradientResult proximal_gradient(const CompositeProblem& problem, Matrix x0,
                                     const ProxGradientOptions& options);

}  // namespace gsr
