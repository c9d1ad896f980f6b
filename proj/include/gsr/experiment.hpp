#pragma once

// Metrics, cross-validation, the Laplacian baseline, opinion combination and
// the experiment runner behind the CLI.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gsr/data.hpp"
#include "gsr/io.hpp"
#include "gsr/solvers.hpp"

namespace gsr {

enum class TaskKind { Regression, Classification };

/// +1 for v > 0, -1 otherwise.
inline double threshold_label(double v) { return v > 0.0 ? 1.0 : -1.0; }

struct Metrics {
  double acc = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
};

/// ACC is the fraction of exact matches (after thresholding both sides for
/// classification); MSE, RMSE and MAE use the raw values.
Metrics compute_metrics(const Matrix& truth, const Matrix& estimate, TaskKind kind);
/// Same, restricted to the entries of `on`.
Metrics compute_metrics(const Matrix& truth, const Matrix& estimate, TaskKind kind, const IndexMask& on);

// ---------------------------------------------------------------------------

enum class SolverId { Gtvm, Gtvr, GsrAdmm, Gmcm, Gmcr, Nuclear, Rgtvr, Lapr, AnomalyDetect };

SolverId solver_from_name(const std::string& name);
std::string solver_name(SolverId id);

/// Combinatorial Laplacian D - W of the symmetrized weights (A + A^T) / 2.
Matrix graph_laplacian(const GraphShift& shift);

/// (D_M + alpha L)^+ D_M t; each column of t is a separate signal.
SignalMatrix laplacian_baseline(const SignalMatrix& t, const IndexMask& mask, const Matrix& laplacian, double alpha);

/// Runs one solver. Node-based solvers take the mask column by column.
/// Parameters come from cfg: gtvr/lapr alpha; gmcm beta; gmcr alpha, beta;
/// nuclear beta; rgtvr alpha, gamma; anomaly detection beta.
RecoveryResult run_solver(SolverId id, const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift,
                          const SolverConfig& cfg);

struct CvResult {
  std::size_t best = 0;
  SolverConfig config;
  std::vector<double> scores;  // validation MSE per grid point
};

/// Splits M into train (fraction `split`) and validation entries, trains on
/// the former and scores MSE on the latter. Ties go to the lowest index.
CvResult cross_validate(const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift, SolverId solver,
                        const std::vector<SolverConfig>& grid, double split, std::uint64_t seed);

// ---------------------------------------------------------------------------

enum class CombineMethod { Average, GtvrDenoise, GmcrDenoise };

CombineMethod combine_method_from_name(const std::string& name);
std::string combine_method_name(CombineMethod m);

/// Labels from a +-1 opinion matrix (one column per expert). Row means are
/// thresholded with ties going to +1. Denoising uses cfg.alpha (and cfg.beta
/// for gmcr).
Vector combine_opinions(const Matrix& opinions, const GraphShift& shift, CombineMethod method,
                        const SolverConfig& cfg);

struct OpinionSpec {
  int experts = 20;
  double easy_fraction = 0.75;
  double easy_accuracy = 0.9;
  double hard_accuracy = 0.3;
};

/// Each expert labels easy rows correctly with probability easy_accuracy and
/// hard rows with hard_accuracy.
Matrix simulate_opinions(const Vector& labels, const OpinionSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------

enum class Task { Inpaint, Complete, Detect, RobustInpaint, CombineOpinions };

struct ExperimentSpec {
  Task task = Task::Inpaint;
  TaskKind kind = TaskKind::Regression;

  // Data: a synthetic recipe, or files.
  std::optional<SyntheticSpec> synthetic;
  std::string graph_path;
  std::string signals_path;

  SolverId solver = SolverId::Gtvr;
  SolverConfig config;
  std::vector<SolverConfig> grid;  // cross-validated when non-empty

  std::optional<SolverId> baseline;
  SolverConfig baseline_config;
  std::vector<SolverConfig> baseline_grid;

  OpinionSpec opinions;
  CombineMethod combine = CombineMethod::GmcrDenoise;

  std::vector<double> ratios{0.1};
  double corruption = 0.0;
  int trials = 1;
  std::uint64_t seed = 0;
  double split = 0.8;
  int threads = 1;
  /// Picks grid points against the ground truth instead of by CV.
  bool oracle_select = false;
  std::string output;

  void validate() const;
};

ExperimentSpec experiment_spec_from_json(const Json& j);
Json to_json(const ExperimentSpec& spec);

struct TrialRow {
  std::size_t ratio_index = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  double ratio = 0.0;
  Metrics metrics;
  std::optional<Metrics> baseline;
  int iterations = 0;
  bool converged = true;
  std::size_t selected = 0;  // grid index used
  double wall_ms = 0.0;
};

struct ExperimentReport {
  std::vector<TrialRow> rows;  // sorted by (ratio_index, trial)
  Json report;
  bool all_converged = true;
};

ExperimentReport run_experiment(const ExperimentSpec& spec);

/// trials.csv content; deterministic for a fixed spec.
std::string format_trials_csv(const ExperimentReport& report);
std::string format_timings_csv(const ExperimentReport& report);

/// Writes report.json, trials.csv and timings.csv into `dir`.
void write_experiment(const ExperimentReport& report, const fs::path& dir);

/// 0 success, 4 if any trial did not converge.
int experiment_exit_code(const ExperimentReport& report);

/// 2 for configuration errors, 3 for data errors, 1 otherwise.
int exit_code_for(const Error& e);

}  // namespace gsr
