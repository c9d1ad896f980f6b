#include "gsr/prox.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace gsr {

void StepSearchConfig::validate() const {
  require(initial_step > 0.0 && std::isfinite(initial_step), ErrorKind::Config, "step.t0 must be positive");
  require(shrink > 0.0 && shrink < 1.0, ErrorKind::Config, "step.rho must lie in (0, 1)");
  require(sufficient_decrease > 0.0 && sufficient_decrease < 1.0, ErrorKind::Config,
          "step.c must lie in (0, 1)");
  require(max_halvings >= 0, ErrorKind::Config, "step.max_halvings must be nonnegative");
}

SignalMatrix shrink(const SignalMatrix& x, double tau) {
  require(tau >= 0.0, ErrorKind::NegativeThreshold, "shrink threshold " + std::to_string(tau));
  return x.unaryExpr([tau](double v) {
    if (v > tau) return v - tau;
    if (v < -tau) return v + tau;
    return 0.0;
  });
}

ThinSvd stable_svd(const Matrix& x) {
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ThinSvd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  for (Eigen::Index i = 0; i < out.u.cols(); ++i) {
    const double scale = out.u.col(i).cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < out.u.rows(); ++r) {
      const double v = out.u(r, i);
      if (std::abs(v) > 1e-12 * scale) {
        if (v < 0.0) {
          out.u.col(i) *= -1.0;
          out.v.col(i) *= -1.0;
        }
        break;
      }
    }
  }
  return out;
}

SignalMatrix svt(const SignalMatrix& x, double tau) {
  require(tau >= 0.0, ErrorKind::NegativeThreshold, "svt threshold " + std::to_string(tau));
  if (x.size() == 0) return x;
  const ThinSvd svd = stable_svd(x);
  const Vector shrunk = shrink(svd.sigma, tau);
  return svd.u * shrunk.asDiagonal() * svd.v.transpose();
}

double nuclear_norm(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(x);
  return svd.singularValues().sum();
}

SignalMatrix project_mask(const SignalMatrix& x, const SignalMatrix& t, const IndexMask& mask) {
  require_same_shape(x, t, "project_mask");
  require(mask.rows() == x.rows() && mask.cols() == x.cols(), ErrorKind::DimensionMismatch,
          "project_mask: mask shape differs from the signal");
  SignalMatrix out = x;
  for (const auto& [r, c] : mask.entries()) out(r, c) = t(r, c);
  return out;
}

StepResult backtrack(const Objective& f, const Gradient& grad, const Matrix& x, const StepSearchConfig& cfg) {
  cfg.validate();
  const double fx = f(x);
  const Matrix g = grad(x);
  require(std::isfinite(fx) && g.allFinite(), ErrorKind::NonFiniteObjective, "backtrack at a non-finite point");
  const double g2 = g.squaredNorm();
  if (g2 == 0.0) return {cfg.initial_step, x, false};

  double t = cfg.initial_step;
  Matrix candidate;
  for (int k = 0; k <= cfg.max_halvings; ++k) {
    candidate = x - t * g;
    const double fc = f(candidate);
    if (std::isfinite(fc) && fc <= fx - cfg.sufficient_decrease * t * g2) return {t, candidate, false};
    if (k < cfg.max_halvings) t *= cfg.shrink;
  }
  return {t, candidate, true};
}

Matrix regularized_solve(const Matrix& h, const Matrix& b, SolveMode mode) {
  require(h.rows() == h.cols() && h.rows() == b.rows(), ErrorKind::DimensionMismatch,
          "regularized_solve: incompatible system");
  if (h.rows() == 0) return Matrix(0, b.cols());
  const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-10 * std::max(1.0, h.cwiseAbs().maxCoeff()), ErrorKind::InvalidArgument,
          "regularized_solve: matrix is not symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (h + h.transpose()));
  const Vector& lambda = eig.eigenvalues();
  const double largest = lambda.cwiseAbs().maxCoeff();
  const double cutoff = 1e-10 * largest;
  Vector inv(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (std::abs(lambda[i]) <= cutoff || largest == 0.0) {
      require(mode == SolveMode::Pseudoinverse, ErrorKind::SingularMatrix,
              "regularized_solve: matrix is singular");
      inv[i] = 0.0;
    } else {
      inv[i] = 1.0 / lambda[i];
    }
  }
  const Matrix& q = eig.eigenvectors();
  return q * (inv.asDiagonal() * (q.transpose() * b));
}

ProxGradientResult proximal_gradient(const CompositeProblem& problem, Matrix x0,
                                     const ProxGradientOptions& options) {
  options.step.validate();
  ProxGradientResult result;
  result.x = std::move(x0);

  double fx = problem.smooth(result.x);
  double objective = fx + problem.nonsmooth(result.x);
  require(std::isfinite(objective), ErrorKind::NonFiniteObjective, "initial objective is not finite");

  for (int it = 0; it < options.max_iterations; ++it) {
    const Matrix g = problem.gradient(result.x);
    double t = options.step.initial_step;
    bool accepted = false;
    Matrix next;
    double f_next = 0.0;
    double obj_next = 0.0;
    for (int k = 0; k <= options.step.max_halvings; ++k) {
      next = problem.prox(result.x - t * g, t);
      const Matrix d = next - result.x;
      f_next = problem.smooth(next);
      obj_next = f_next + problem.nonsmooth(next);
      const double model = fx + g.cwiseProduct(d).sum() + d.squaredNorm() / (2.0 * t);
      const double slack = 1e-13 * (1.0 + std::abs(fx));
      if (std::isfinite(obj_next) && f_next <= model + slack && obj_next <= objective) {
        accepted = true;
        break;
      }
      t *= options.step.shrink;
    }
    ++result.iterations;
    if (!accepted) {
      // No step decreases F at machine precision: treat as a stationary point.
      result.trace.push_back(objective);
      result.line_search_exhausted = true;
      result.converged = true;
      return result;
    }
    const double diff = objective - obj_next;
    result.x = std::move(next);
    fx = f_next;
    objective = obj_next;
    result.trace.push_back(objective);
    if (std::abs(diff) < options.tolerance) {
      result.converged = true;
      return result;
    }
  }
  return result;
}

}  // namespace gsr
