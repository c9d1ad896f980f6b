#pragma once

// Recovery algorithms: the general ADMM solver for
//
//   min  ||W||_F^2 + alpha S2(X) + beta ||X||_* + gamma ||E||_1
//   s.t. T = X + W + E + C,  C_M = 0,
//
// and its specializations (inpainting, matrix completion, anomaly detection,
// robust inpainting).

#include <vector>

#include "gsr/graph.hpp"
#include "gsr/prox.hpp"

namespace gsr {

struct SolverConfig {
  double alpha = 1.0;    // variation weight
  double beta = 0.0;     // nuclear-norm weight
  double gamma = 0.0;    // outlier weight; 0 removes the outlier block
  double epsilon = 1.0;  // noise budget; 0 pins W to zero
  double penalty = 1.0;  // augmented Lagrangian parameter
  StepSearchConfig step;
  double tol_outer = 1e-8;
  double tol_inner = 1e-8;
  int max_outer = 5000;
  int max_inner = 100;

  void validate() const;
};

struct RecoveryResult {
  SignalMatrix x;
  SignalMatrix w;
  SignalMatrix e;
  // ADMM auxiliaries (empty for the gradient-type solvers).
  SignalMatrix z;
  SignalMatrix c;
  SignalMatrix y1;
  SignalMatrix y2;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  int threads = 1;
  /// ||T - X - W - E - C||_F at exit (ADMM solvers).
  double residual = 0.0;
};

/// General graph signal recovery by ADMM.
RecoveryResult gsr_admm(const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift,
                        const SolverConfig& cfg);

/// Noiseless inpainting: x_M = t_M, x_U = -(A~_UU)^+ A~_UM t_M.
Vector gtvm(const Vector& t, const IndexMask& mask, const GraphShift& shift);

/// Regularized inpainting x = (D_M + alpha A~)^+ [t_M; 0]. Each column of t is
/// treated as a separate signal observed on the same nodes.
SignalMatrix gtvr(const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift, double alpha);

/// Inpainting under ||(x - t)_M|| <= epsilon, found by bisection over the
/// GTVR weight. epsilon = 0 reduces to gtvm.
Vector inpaint_constrained(const Vector& t, const IndexMask& mask, const GraphShift& shift, double epsilon);

/// Matrix completion with X_M = T_M enforced by projection.
RecoveryResult gmcm(const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift, double beta,
                    const SolverConfig& cfg);

/// Matrix completion min ||(X - T)_M||^2 + alpha S2(X) + beta ||X||_*.
RecoveryResult gmcr(const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift, double alpha,
                    double beta, const SolverConfig& cfg);

/// min_e S2(t - e) + beta ||e||_1. Result: e = outliers, x = t - e.
RecoveryResult anomaly_detect(const Vector& t, const GraphShift& shift, double beta, const SolverConfig& cfg);

struct ConstrainedDetection {
  RecoveryResult result;
  double beta = 0.0;  // weight of the returned penalized solution; 0 for the exact smooth limit
};

/// min ||e||_1 s.t. S2(t - e) <= eta^2.
ConstrainedDetection anomaly_detect_constrained(const Vector& t, const GraphShift& shift, double eta,
                                                const SolverConfig& cfg);

/// Robust inpainting min ||t_M - (x + e)_M||^2 + alpha S2(x) + gamma ||e||_1 by ADMM.
RecoveryResult rgtvr(const Vector& t, const IndexMask& mask, const GraphShift& shift, double alpha, double gamma,
                     const SolverConfig& cfg);

}  // namespace gsr
