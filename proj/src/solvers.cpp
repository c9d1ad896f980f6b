#include "gsr/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

namespace gsr {

namespace {

constexpr double kFeasibilityTol = 1e-6;

void check_mask(const SignalMatrix& t, const IndexMask& mask, const char* who) {
  require(mask.rows() == t.rows() && mask.cols() == t.cols(), ErrorKind::DimensionMismatch,
          std::string(who) + ": mask shape differs from the measurements");
}

void check_node_mask(const SignalMatrix& t, const IndexMask& mask, const char* who) {
  require(mask.cols() == 1 && mask.rows() == t.rows(), ErrorKind::DimensionMismatch,
          std::string(who) + ": expected a node mask over " + std::to_string(t.rows()) + " nodes");
  require(!mask.empty(), ErrorKind::EmptyAccessibleSet, std::string(who) + ": no accessible node");
}

/// Dense solver for (I + s A~) y = b, factored once per solve.
class SmoothingSolve {
 public:
  SmoothingSolve(const Matrix& tilde, double scale)
      : llt_(Matrix::Identity(tilde.rows(), tilde.cols()) + scale * tilde) {
    require(llt_.info() == Eigen::Success, ErrorKind::SingularMatrix, "I + s A~ is not positive definite");
  }
  Matrix operator()(const Matrix& b) const { return llt_.solve(b); }

 private:
  Eigen::LLT<Matrix> llt_;
};

ProxGradientOptions inner_options(const SolverConfig& cfg) {
  return {cfg.step, cfg.tol_inner, cfg.max_inner};
}

ProxGradientOptions outer_options(const SolverConfig& cfg) {
  return {cfg.step, cfg.tol_outer, cfg.max_outer};
}

RecoveryResult from_prox(ProxGradientResult&& r) {
  RecoveryResult out;
  out.x = std::move(r.x);
  out.trace = std::move(r.trace);
  out.iterations = r.iterations;
  out.converged = r.converged;
  return out;
}

}  // namespace

void SolverConfig::validate() const {
  auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  require(nonneg(alpha) && nonneg(beta) && nonneg(gamma) && nonneg(epsilon), ErrorKind::Config,
          "alpha, beta, gamma and epsilon must be finite and nonnegative");
  require(std::isfinite(penalty) && penalty > 0.0, ErrorKind::Config, "penalty must be positive");
  require(tol_outer > 0.0 && tol_inner > 0.0, ErrorKind::Config, "tolerances must be positive");
  require(max_outer >= 1 && max_inner >= 1, ErrorKind::Config, "iteration caps must be at least 1");
  step.validate();
}

// ---------------------------------------------------------------------------

RecoveryResult gsr_admm(const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift,
                        const SolverConfig& cfg) {
  cfg.validate();
  require_normalized(shift, "gsr_admm");
  require_node_count(t, shift, "gsr_admm");
  check_mask(t, mask, "gsr_admm");
  require_finite(t, "gsr_admm");

  const double eta = cfg.penalty;
  const bool noise_block = cfg.epsilon > 0.0;
  const bool outlier_block = cfg.gamma > 0.0;
  const Matrix tilde = tilde_shift(shift);
  const SmoothingSolve z_solve(tilde, 2.0 * cfg.alpha / eta);
  const Matrix hidden = mask.complement().indicator();
  const double feasibility_tol = kFeasibilityTol * (1.0 + t.norm());

  const Eigen::Index n = t.rows();
  const Eigen::Index l = t.cols();
  RecoveryResult r;
  r.x = project_mask(Matrix::Zero(n, l), t, mask);
  r.w = r.e = r.z = r.c = r.y1 = r.y2 = Matrix::Zero(n, l);

  auto objective = [&] {
    double value = cfg.alpha * matrix_variation(r.x, shift);
    if (noise_block) value += r.w.squaredNorm();
    if (cfg.beta > 0.0) value += cfg.beta * nuclear_norm(r.x);
    if (outlier_block) value += cfg.gamma * r.e.lpNorm<1>();
    return value;
  };

  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_outer; ++it) {
    // X: (beta/eta)||X||_* + 1/2||X - B1||^2 + 1/2||X - B2||^2
    {
      const Matrix b1 = t - r.w - r.e - r.c - r.y1 / eta;
      const Matrix b2 = r.z + r.y2 / eta;
      if (cfg.beta > 0.0) {
        const double level = cfg.beta / eta;
        CompositeProblem block{
            [&](const Matrix& x) { return 0.5 * ((x - b1).squaredNorm() + (x - b2).squaredNorm()); },
            [&](const Matrix& x) -> Matrix { return (x - b1) + (x - b2); },
            [&](const Matrix& x) { return level * nuclear_norm(x); },
            [&](const Matrix& y, double step) { return svt(y, step * level); }};
        r.x = proximal_gradient(block, r.x, inner_options(cfg)).x;
      } else {
        r.x = 0.5 * (b1 + b2);
      }
    }

    if (noise_block) r.w = eta * (t - r.x - r.e - r.c - r.y1 / eta) / (eta + 2.0);

    // E: (gamma/eta)||E||_1 + 1/2||E - R||^2
    if (outlier_block) {
      const Matrix target = t - r.x - r.w - r.c - r.y1 / eta;
      const double level = cfg.gamma / eta;
      CompositeProblem block{
          [&](const Matrix& e) { return 0.5 * (e - target).squaredNorm(); },
          [&](const Matrix& e) -> Matrix { return e - target; },
          [&](const Matrix& e) { return level * e.lpNorm<1>(); },
          [&](const Matrix& y, double step) { return shrink(y, step * level); }};
      r.e = proximal_gradient(block, r.e, inner_options(cfg)).x;
    }

    r.z = z_solve(r.x - r.y2 / eta);
    r.c = (t - r.x - r.w - r.e - r.y1 / eta).cwiseProduct(hidden);

    const Matrix primal = t - r.x - r.w - r.e - r.c;
    const Matrix coupling = r.x - r.z;
    r.y1 -= eta * primal;
    r.y2 -= eta * coupling;

    const double value = objective();
    r.trace.push_back(value);
    r.iterations = it + 1;
    r.residual = primal.norm();
    require(std::isfinite(value), ErrorKind::NonFiniteObjective, "gsr_admm objective diverged");
    if (std::abs(previous - value) < cfg.tol_outer && r.residual <= feasibility_tol &&
        coupling.norm() <= feasibility_tol) {
      r.converged = true;
      break;
    }
    previous = value;
  }
  return r;
}

// ---------------------------------------------------------------------------

Vector gtvm(const Vector& t, const IndexMask& mask, const GraphShift& shift) {
  require_normalized(shift, "gtvm");
  require_node_count(t, shift, "gtvm");
  check_node_mask(t, mask, "gtvm");
  const BlockPartition blocks = partition_blocks(tilde_shift(shift), mask);
  Vector x = t;
  if (blocks.u.empty()) return x;
  const Vector t_m = t(blocks.m);
  x(blocks.u) = -regularized_solve(blocks.uu, blocks.um * t_m, SolveMode::Pseudoinverse);
  return x;
}

SignalMatrix gtvr(const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift, double alpha) {
  require_normalized(shift, "gtvr");
  require_node_count(t, shift, "gtvr");
  check_node_mask(t, mask, "gtvr");
  require(alpha > 0.0 && std::isfinite(alpha), ErrorKind::InvalidArgument, "gtvr: alpha must be positive");
  const Matrix indicator = mask.indicator();
  Matrix h = alpha * tilde_shift(shift);
  h.diagonal() += indicator.col(0);
  const Matrix rhs = indicator.col(0).asDiagonal() * t;
  return regularized_solve(h, rhs, SolveMode::Pseudoinverse);
}

Vector inpaint_constrained(const Vector& t, const IndexMask& mask, const GraphShift& shift, double epsilon) {
  require(epsilon >= 0.0 && std::isfinite(epsilon), ErrorKind::InvalidArgument,
          "inpaint_constrained: epsilon must be nonnegative");
  if (epsilon == 0.0) return gtvm(t, mask, shift);
  const Matrix indicator = mask.indicator();
  auto misfit = [&](const Vector& x) { return (x - t).cwiseProduct(indicator.col(0)).norm(); };

  // The accessible misfit grows with alpha; keep the largest feasible alpha.
  double lo = std::log(1e-10);
  double hi = std::log(1e10);
  Vector best = gtvr(t, mask, shift, std::exp(lo));
  if (misfit(best) > epsilon) return gtvm(t, mask, shift);
  const Vector top = gtvr(t, mask, shift, std::exp(hi));
  if (misfit(top) <= epsilon) return top;
  for (int k = 0; k < 100; ++k) {
    const double mid = 0.5 * (lo + hi);
    Vector x = gtvr(t, mask, shift, std::exp(mid));
    if (misfit(x) <= epsilon) {
      lo = mid;
      best = std::move(x);
    } else {
      hi = mid;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

RecoveryResult gmcm(const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift, double beta,
                    const SolverConfig& cfg) {
  cfg.validate();
  require_normalized(shift, "gmcm");
  require_node_count(t, shift, "gmcm");
  check_mask(t, mask, "gmcm");
  require(!mask.empty(), ErrorKind::EmptyAccessibleSet, "gmcm: no accessible entry");
  require(beta >= 0.0 && std::isfinite(beta), ErrorKind::InvalidArgument, "gmcm: beta must be nonnegative");

  const Matrix tilde = tilde_shift(shift);
  const Matrix& a = shift.weights();
  CompositeProblem problem{
      [&](const Matrix& x) { return (x - a * x).squaredNorm(); },
      [&](const Matrix& x) -> Matrix { return 2.0 * tilde * x; },
      [&](const Matrix& x) { return beta > 0.0 ? beta * nuclear_norm(x) : 0.0; },
      [&](const Matrix& y, double step) {
        return project_mask(beta > 0.0 ? svt(y, step * beta) : y, t, mask);
      }};
  RecoveryResult r = from_prox(proximal_gradient(problem, project_mask(Matrix::Zero(t.rows(), t.cols()), t, mask),
                                                 outer_options(cfg)));
  r.w = r.e = Matrix::Zero(t.rows(), t.cols());
  return r;
}

RecoveryResult gmcr(const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift, double alpha,
                    double beta, const SolverConfig& cfg) {
  cfg.validate();
  require_normalized(shift, "gmcr");
  require_node_count(t, shift, "gmcr");
  check_mask(t, mask, "gmcr");
  require(alpha >= 0.0 && beta >= 0.0 && std::isfinite(alpha) && std::isfinite(beta), ErrorKind::InvalidArgument,
          "gmcr: alpha and beta must be nonnegative");

  const Matrix tilde = tilde_shift(shift);
  const Matrix& a = shift.weights();
  const Matrix indicator = mask.indicator();
  CompositeProblem problem{
      [&](const Matrix& x) {
        double value = (x - t).cwiseProduct(indicator).squaredNorm();
        if (alpha > 0.0) value += alpha * (x - a * x).squaredNorm();
        return value;
      },
      [&](const Matrix& x) -> Matrix {
        Matrix g = 2.0 * (x - t).cwiseProduct(indicator);
        if (alpha > 0.0) g += 2.0 * alpha * tilde * x;
        return g;
      },
      [&](const Matrix& x) { return beta > 0.0 ? beta * nuclear_norm(x) : 0.0; },
      [&](const Matrix& y, double step) { return beta > 0.0 ? svt(y, step * beta) : y; }};
  RecoveryResult r = from_prox(proximal_gradient(problem, project_mask(Matrix::Zero(t.rows(), t.cols()), t, mask),
                                                 outer_options(cfg)));
  r.w = r.e = Matrix::Zero(t.rows(), t.cols());
  return r;
}

// ---------------------------------------------------------------------------

RecoveryResult anomaly_detect(const Vector& t, const GraphShift& shift, double beta, const SolverConfig& cfg) {
  cfg.validate();
  require_normalized(shift, "anomaly_detect");
  require_node_count(t, shift, "anomaly_detect");
  require(beta > 0.0 && std::isfinite(beta), ErrorKind::InvalidArgument, "anomaly_detect: beta must be positive");

  const Matrix tilde = tilde_shift(shift);
  const Matrix& a = shift.weights();
  const Matrix signal = t;
  CompositeProblem problem{
      [&](const Matrix& e) {
        const Matrix x = signal - e;
        return (x - a * x).squaredNorm();
      },
      // Gradient of S2(t - e) with respect to e.
      [&](const Matrix& e) -> Matrix { return -2.0 * tilde * (signal - e); },
      [&](const Matrix& e) { return beta * e.lpNorm<1>(); },
      [&](const Matrix& y, double step) { return shrink(y, step * beta); }};
  ProxGradientResult pg = proximal_gradient(problem, Matrix::Zero(t.size(), 1), outer_options(cfg));
  RecoveryResult r;
  r.e = std::move(pg.x);
  r.x = signal - r.e;
  r.w = Matrix::Zero(t.size(), 1);
  r.trace = std::move(pg.trace);
  r.iterations = pg.iterations;
  r.converged = pg.converged;
  return r;
}

namespace {

// min ||t - N c||_1 over the null space N of (I - A): the exact eta = 0 limit.
Vector smooth_l1_fit(const Vector& t, const GraphShift& shift) {
  const Eigen::Index n = t.size();
  const Matrix d = Matrix::Identity(n, n) - shift.weights();
  Eigen::JacobiSVD<Matrix> svd(d, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double cutoff = 1e-10 * std::max(s[0], 1e-300);
  std::vector<Eigen::Index> null_cols;
  for (Eigen::Index i = 0; i < n; ++i)
    if (s[i] <= cutoff) null_cols.push_back(i);
  if (null_cols.empty()) return Vector::Zero(n);
  const Matrix basis = svd.matrixV()(Eigen::all, null_cols);

  if (basis.cols() == 1) {
    // Weighted median of t_i / b_i with weights |b_i|.
    const Vector b = basis.col(0);
    std::vector<std::pair<double, double>> pts;
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::abs(b[i]) > 1e-14) pts.emplace_back(t[i] / b[i], std::abs(b[i]));
    std::sort(pts.begin(), pts.end());
    double total = 0.0;
    for (const auto& p : pts) total += p.second;
    double acc = 0.0;
    double c = pts.empty() ? 0.0 : pts.back().first;
    for (const auto& p : pts) {
      acc += p.second;
      if (acc >= 0.5 * total) {
        c = p.first;
        break;
      }
    }
    return c * b;
  }

  // Several smooth directions: least absolute deviations by iteratively
  // reweighted least squares.
  Vector coef = basis.colPivHouseholderQr().solve(t);
  for (int it = 0; it < 500; ++it) {
    const Vector resid = t - basis * coef;
    const Vector weights = resid.cwiseAbs().cwiseMax(1e-12).cwiseInverse();
    const Matrix bw = basis.transpose() * weights.asDiagonal();
    const Vector next = (bw * basis).ldlt().solve(bw * t);
    const double change = (next - coef).norm();
    coef = next;
    if (change <= 1e-14 * (1.0 + coef.norm())) break;
  }
  return basis * coef;
}

}  // namespace

ConstrainedDetection anomaly_detect_constrained(const Vector& t, const GraphShift& shift, double eta,
                                                const SolverConfig& cfg) {
  cfg.validate();
  require_normalized(shift, "anomaly_detect_constrained");
  require_node_count(t, shift, "anomaly_detect_constrained");
  require(eta >= 0.0 && std::isfinite(eta), ErrorKind::InvalidArgument, "eta must be nonnegative");

  const double budget = eta * eta;
  const double total = quadratic_variation(t, shift);
  ConstrainedDetection out;
  if (total <= budget) {
    out.result.e = Vector::Zero(t.size());
    out.result.x = t;
    out.result.w = Vector::Zero(t.size());
    out.result.trace = {0.0};
    out.result.iterations = 1;
    out.result.converged = true;
    out.beta = std::numeric_limits<double>::infinity();
    return out;
  }
  if (eta == 0.0) {
    out.result.x = smooth_l1_fit(t, shift);
    out.result.e = t - out.result.x;
    out.result.w = Vector::Zero(t.size());
    out.result.trace = {out.result.e.lpNorm<1>()};
    out.result.iterations = 1;
    out.result.converged = true;
    return out;
  }

  // Larger beta gives sparser e and a rougher t - e; keep the largest feasible beta.
  const Matrix tilde = tilde_shift(shift);
  const double beta_max = (2.0 * tilde * t).cwiseAbs().maxCoeff();
  auto feasible = [&](const RecoveryResult& r) {
    return quadratic_variation(r.x, shift) <= budget * (1.0 + 1e-6);
  };
  double lo = std::log(beta_max) - std::log(1e6);
  RecoveryResult best = anomaly_detect(t, shift, std::exp(lo), cfg);
  for (int k = 0; k < 4 && !feasible(best); ++k) {
    lo -= std::log(1e3);
    best = anomaly_detect(t, shift, std::exp(lo), cfg);
  }
  require(feasible(best), ErrorKind::Infeasible, "bisection could not bracket a feasible weight");
  double hi = std::log(beta_max);
  for (int k = 0; k < 40; ++k) {
    const double mid = 0.5 * (lo + hi);
    RecoveryResult r = anomaly_detect(t, shift, std::exp(mid), cfg);
    if (feasible(r)) {
      lo = mid;
      best = std::move(r);
    } else {
      hi = mid;
    }
  }
  out.result = std::move(best);
  out.beta = std::exp(lo);
  return out;
}

// ---------------------------------------------------------------------------

RecoveryResult rgtvr(const Vector& t, const IndexMask& mask, const GraphShift& shift, double alpha, double gamma,
                     const SolverConfig& cfg) {
  cfg.validate();
  require_normalized(shift, "rgtvr");
  require_node_count(t, shift, "rgtvr");
  check_node_mask(t, mask, "rgtvr");
  require(alpha >= 0.0 && gamma >= 0.0 && std::isfinite(alpha) && std::isfinite(gamma),
          ErrorKind::InvalidArgument, "rgtvr: alpha and gamma must be nonnegative");

  const double eta = cfg.penalty;
  const Matrix tilde = tilde_shift(shift);
  const SmoothingSolve x_solve(tilde, 2.0 * alpha / eta);
  const Vector hidden = mask.complement().indicator().col(0);
  const double feasibility_tol = kFeasibilityTol * (1.0 + t.norm());
  const Eigen::Index n = t.size();

  Vector x = project_mask(Vector::Zero(n), t, mask);
  Vector w = Vector::Zero(n), e = Vector::Zero(n), c = Vector::Zero(n), lambda = Vector::Zero(n);

  RecoveryResult r;
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_outer; ++it) {
    x = x_solve(t - e - w - c - lambda / eta);
    w = eta * (t - x - e - c - lambda / eta) / (eta + 2.0);
    if (gamma > 0.0) e = shrink(t - x - w - c - lambda / eta, gamma / eta);
    c = (t - x - w - e - lambda / eta).cwiseProduct(hidden);
    const Vector primal = t - x - e - w - c;
    lambda -= eta * primal;

    const double value = w.squaredNorm() + alpha * quadratic_variation(x, shift) + gamma * e.lpNorm<1>();
    require(std::isfinite(value), ErrorKind::NonFiniteObjective, "rgtvr objective diverged");
    r.trace.push_back(value);
    r.iterations = it + 1;
    r.residual = primal.norm();
    if (std::abs(previous - value) < cfg.tol_outer && r.residual <= feasibility_tol) {
      r.converged = true;
      break;
    }
    previous = value;
  }
  r.x = x;
  r.w = w;
  r.e = e;
  r.c = c;
  r.y1 = lambda;
  return r;
}

}  // namespace gsr
