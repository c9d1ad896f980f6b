#include "gsr/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <Eigen/Core>

namespace gsr {

namespace {

constexpr const char* kVersion = "0.1.0";

IndexMask column_mask(const IndexMask& mask, Eigen::Index c) {
  IndexMask out(mask.rows(), 1);
  for (Eigen::Index r = 0; r < mask.rows(); ++r) out.set(r, 0, mask.accessible(r, c));
  return out;
}

template <typename E, typename Table>
std::string lookup_name(const Table& table, E value) {
  for (const auto& [name, v] : table)
    if (v == value) return name;
  return "?";
}

template <typename E, typename Table>
E lookup_value(const Table& table, const std::string& name, const char* what) {
  for (const auto& [n, v] : table)
    if (n == name) return v;
  fail(ErrorKind::Config, std::string("unknown ") + what + " '" + name + "'");
}

const std::vector<std::pair<std::string, SolverId>> kSolvers = {
    {"gtvm", SolverId::Gtvm},   {"gtvr", SolverId::Gtvr},         {"gsr-admm", SolverId::GsrAdmm},
    {"gmcm", SolverId::Gmcm},   {"gmcr", SolverId::Gmcr},         {"nuclear", SolverId::Nuclear},
    {"rgtvr", SolverId::Rgtvr}, {"lapr", SolverId::Lapr},         {"ad", SolverId::AnomalyDetect},
};

const std::vector<std::pair<std::string, CombineMethod>> kMethods = {
    {"avg", CombineMethod::Average},
    {"gtvr-denoise", CombineMethod::GtvrDenoise},
    {"gmcr-denoise", CombineMethod::GmcrDenoise},
};

const std::vector<std::pair<std::string, Task>> kTasks = {
    {"inpaint", Task::Inpaint},
    {"complete", Task::Complete},
    {"detect", Task::Detect},
    {"robust-inpaint", Task::RobustInpaint},
    {"combine-opinions", Task::CombineOpinions},
};

const std::vector<std::pair<std::string, TaskKind>> kKinds = {
    {"regression", TaskKind::Regression},
    {"classification", TaskKind::Classification},
};

Vector sign_of_row_means(const Matrix& x) {
  Vector out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) = x.row(r).mean() >= 0.0 ? 1.0 : -1.0;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Metrics compute_metrics(const Matrix& truth, const Matrix& estimate, TaskKind kind) {
  return compute_metrics(truth, estimate, kind, IndexMask::full(truth.rows(), truth.cols()));
}

Metrics compute_metrics(const Matrix& truth, const Matrix& estimate, TaskKind kind, const IndexMask& on) {
  require_same_shape(truth, estimate, "metrics");
  require(on.rows() == truth.rows() && on.cols() == truth.cols(), ErrorKind::DimensionMismatch,
          "metrics: mask shape differs from the signal");
  const auto entries = on.entries();
  require(!entries.empty(), ErrorKind::EmptyMask, "metrics: no entries to score");
  Metrics m;
  double hits = 0.0, sq = 0.0, abs = 0.0;
  for (const auto& [r, c] : entries) {
    const double a = truth(r, c), b = estimate(r, c);
    if (kind == TaskKind::Classification)
      hits += threshold_label(a) == threshold_label(b) ? 1.0 : 0.0;
    else
      hits += a == b ? 1.0 : 0.0;
    sq += (a - b) * (a - b);
    abs += std::abs(a - b);
  }
  const double n = static_cast<double>(entries.size());
  m.acc = hits / n;
  m.mse = sq / n;
  m.rmse = std::sqrt(m.mse);
  m.mae = abs / n;
  return m;
}

// ---------------------------------------------------------------------------

SolverId solver_from_name(const std::string& name) { return lookup_value<SolverId>(kSolvers, name, "solver"); }
std::string solver_name(SolverId id) { return lookup_name(kSolvers, id); }

CombineMethod combine_method_from_name(const std::string& name) {
  return lookup_value<CombineMethod>(kMethods, name, "combination method");
}
std::string combine_method_name(CombineMethod m) { return lookup_name(kMethods, m); }

Matrix graph_laplacian(const GraphShift& shift) {
  const Matrix w = 0.5 * (shift.weights() + shift.weights().transpose());
  Matrix l = -w;
  l.diagonal() += w.rowwise().sum();
  return l;
}

SignalMatrix laplacian_baseline(const SignalMatrix& t, const IndexMask& mask, const Matrix& laplacian, double alpha) {
  require(laplacian.rows() == laplacian.cols(), ErrorKind::DimensionMismatch, "laplacian_baseline: L is not square");
  require(laplacian.rows() == t.rows(), ErrorKind::DimensionMismatch, "laplacian_baseline: size mismatch");
  require(mask.rows() == t.rows() && mask.cols() == t.cols(), ErrorKind::DimensionMismatch,
          "laplacian_baseline: mask shape differs from the signal");
  require(alpha >= 0.0 && std::isfinite(alpha), ErrorKind::InvalidArgument, "laplacian_baseline: alpha must be >= 0");
  require_finite(t, "laplacian_baseline");
  const double asym = (laplacian - laplacian.transpose()).norm();
  require(asym <= 1e-10 * (1.0 + laplacian.norm()), ErrorKind::NonSymmetricLaplacian,
          "laplacian_baseline: L is not symmetric");

  SignalMatrix out(t.rows(), t.cols());
  for (Eigen::Index c = 0; c < t.cols(); ++c) {
    Matrix h = alpha * laplacian;
    Vector b = Vector::Zero(t.rows());
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      if (!mask.accessible(r, c)) continue;
      h(r, r) += 1.0;
      b(r) = t(r, c);
    }
    out.col(c) = regularized_solve(h, b, SolveMode::Pseudoinverse);
  }
  return out;
}

RecoveryResult run_solver(SolverId id, const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift,
                          const SolverConfig& cfg) {
  require(mask.rows() == t.rows() && mask.cols() == t.cols(), ErrorKind::DimensionMismatch,
          "run_solver: mask shape differs from the signal");
  switch (id) {
    case SolverId::GsrAdmm:
      return gsr_admm(t, mask, shift, cfg);
    case SolverId::Gmcm:
      return gmcm(t, mask, shift, cfg.beta, cfg);
    case SolverId::Gmcr:
      return gmcr(t, mask, shift, cfg.alpha, cfg.beta, cfg);
    case SolverId::Nuclear:
      return gmcr(t, mask, shift, 0.0, cfg.beta, cfg);
    case SolverId::Lapr: {
      RecoveryResult r;
      r.x = laplacian_baseline(t, mask, graph_laplacian(shift), cfg.alpha);
      r.w = Matrix::Zero(t.rows(), t.cols());
      r.e = Matrix::Zero(t.rows(), t.cols());
      r.converged = true;
      return r;
    }
    default:
      break;
  }

  // Node solvers: one column at a time.
  RecoveryResult out;
  out.x = Matrix::Zero(t.rows(), t.cols());
  out.w = Matrix::Zero(t.rows(), t.cols());
  out.e = Matrix::Zero(t.rows(), t.cols());
  out.converged = true;
  for (Eigen::Index c = 0; c < t.cols(); ++c) {
    const Vector col = t.col(c);
    const IndexMask m = column_mask(mask, c);
    if (id != SolverId::AnomalyDetect && m.empty()) continue;  // nothing observed: zero estimate
    switch (id) {
      case SolverId::Gtvm:
        out.x.col(c) = gtvm(col, m, shift);
        break;
      case SolverId::Gtvr:
        out.x.col(c) = gtvr(col, m, shift, cfg.alpha);
        break;
      case SolverId::Rgtvr:
      case SolverId::AnomalyDetect: {
        RecoveryResult r = id == SolverId::Rgtvr ? rgtvr(col, m, shift, cfg.alpha, cfg.gamma, cfg)
                                                 : anomaly_detect(col, shift, cfg.beta, cfg);
        out.x.col(c) = r.x;
        out.e.col(c) = r.e;
        out.iterations = std::max(out.iterations, r.iterations);
        out.converged = out.converged && r.converged;
        out.residual = std::max(out.residual, r.residual);
        if (c == 0) out.trace = std::move(r.trace);
        break;
      }
      default:
        break;
    }
  }
  return out;
}

CvResult cross_validate(const SignalMatrix& t, const IndexMask& mask, const GraphShift& shift, SolverId solver,
                        const std::vector<SolverConfig>& grid, double split, std::uint64_t seed) {
  require(!grid.empty(), ErrorKind::EmptyGrid, "cross_validate: empty grid");
  require(split > 0.0 && split < 1.0, ErrorKind::InvalidArgument, "cross_validate: split must lie in (0, 1)");
  CvResult out;
  out.best = 0;
  out.config = grid.front();
  if (grid.size() == 1) {
    out.scores.push_back(0.0);
    return out;
  }
  const auto entries = mask.entries();
  require(entries.size() >= 2, ErrorKind::EmptyAccessibleSet, "cross_validate: need at least two accessible entries");
  auto n_val = static_cast<std::size_t>(std::llround((1.0 - split) * static_cast<double>(entries.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, entries.size() - 1);

  IndexMask train = mask;
  IndexMask val(mask.rows(), mask.cols());
  Rng rng = Rng::stream(seed, "cv");
  for (std::size_t k : rng.sample(entries.size(), n_val)) {
    const auto [r, c] = entries[k];
    train.set(r, c, false);
    val.set(r, c, true);
  }

  double best = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const RecoveryResult r = run_solver(solver, t, train, shift, grid[g]);
    const double score = compute_metrics(t, r.x, TaskKind::Regression, val).mse;
    out.scores.push_back(score);
    if (g == 0 || score < best) {
      best = score;
      out.best = g;
    }
  }
  out.config = grid[out.best];
  return out;
}

// ---------------------------------------------------------------------------

Vector combine_opinions(const Matrix& opinions, const GraphShift& shift, CombineMethod method,
                        const SolverConfig& cfg) {
  require(opinions.size() > 0, ErrorKind::DimensionMismatch, "combine_opinions: empty opinion matrix");
  require_node_count(opinions, shift, "combine_opinions");
  for (Eigen::Index i = 0; i < opinions.size(); ++i) {
    const double v = opinions.data()[i];
    require(v == 1.0 || v == -1.0, ErrorKind::NonBinaryInput, "combine_opinions: entries must be +1 or -1");
  }
  switch (method) {
    case CombineMethod::Average:
      return sign_of_row_means(opinions);
    case CombineMethod::GtvrDenoise:
      return sign_of_row_means(gtvr(opinions, IndexMask::full(opinions.rows(), 1), shift, cfg.alpha));
    case CombineMethod::GmcrDenoise:
      return sign_of_row_means(
          gmcr(opinions, IndexMask::full(opinions.rows(), opinions.cols()), shift, cfg.alpha, cfg.beta, cfg).x);
  }
  return sign_of_row_means(opinions);
}

Matrix simulate_opinions(const Vector& labels, const OpinionSpec& spec, std::uint64_t seed) {
  require(spec.experts >= 1, ErrorKind::InvalidArgument, "opinions: experts must be >= 1");
  require(spec.easy_fraction >= 0.0 && spec.easy_fraction <= 1.0, ErrorKind::InvalidArgument,
          "opinions: easy_fraction must lie in [0, 1]");
  require(spec.easy_accuracy >= 0.0 && spec.easy_accuracy <= 1.0 && spec.hard_accuracy >= 0.0 &&
              spec.hard_accuracy <= 1.0,
          ErrorKind::InvalidArgument, "opinions: accuracies must lie in [0, 1]");
  const auto n = static_cast<std::size_t>(labels.size());
  const auto n_easy = static_cast<std::size_t>(std::llround(spec.easy_fraction * static_cast<double>(n)));
  Rng rng = Rng::stream(seed, "opinions");
  std::vector<char> hard(n, 0);
  for (std::size_t i : rng.sample(n, n - n_easy)) hard[i] = 1;

  Matrix out(labels.size(), spec.experts);
  for (int k = 0; k < spec.experts; ++k)
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      const double p = hard[static_cast<std::size_t>(i)] ? spec.hard_accuracy : spec.easy_accuracy;
      out(i, k) = rng.uniform() < p ? labels(i) : -labels(i);
    }
  return out;
}

// ---------------------------------------------------------------------------

void ExperimentSpec::validate() const {
  require(trials >= 1, ErrorKind::Config, "trials must be >= 1");
  require(!ratios.empty(), ErrorKind::Config, "ratios must not be empty");
  for (double r : ratios) require(r > 0.0 && r <= 1.0, ErrorKind::Config, "ratios must lie in (0, 1]");
  require(corruption >= 0.0 && corruption < 1.0, ErrorKind::Config, "corruption must lie in [0, 1)");
  require(split > 0.0 && split < 1.0, ErrorKind::Config, "split must lie in (0, 1)");
  require(threads >= 1, ErrorKind::Config, "threads must be >= 1");
  require(synthetic.has_value() != !graph_path.empty(), ErrorKind::Config,
          "data: give either a synthetic recipe or a graph file");
  if (!synthetic) require(!signals_path.empty(), ErrorKind::Config, "data: signals file missing");
  if (synthetic) {
    try {
      synthetic->validate();
    } catch (const Error& e) {
      fail(ErrorKind::Config, e.what());
    }
  }
  if (oracle_select) require(!grid.empty(), ErrorKind::Config, "oracle_select needs a grid");
  if (task == Task::Detect)
    require(solver == SolverId::AnomalyDetect, ErrorKind::Config, "detect task uses the 'ad' solver");
  if (task == Task::CombineOpinions)
    require(combine != CombineMethod::Average || grid.empty(), ErrorKind::Config,
            "avg combination takes no grid");
}

namespace {

SolverConfig merged_config(const SolverConfig& base, const Json& overrides) {
  Json j = to_json(base);
  j.update(overrides, true);
  return solver_config_from_json(j);
}

std::vector<SolverConfig> grid_from_json(const SolverConfig& base, const Json& j) {
  require(j.is_array(), ErrorKind::Config, "grid must be an array");
  std::vector<SolverConfig> out;
  for (const Json& entry : j) out.push_back(merged_config(base, entry));
  require(!out.empty(), ErrorKind::EmptyGrid, "grid is empty");
  return out;
}

void check_keys(const Json& j, const std::vector<std::string>& known, const std::string& what) {
  require(j.is_object(), ErrorKind::Config, what + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    require(std::find(known.begin(), known.end(), key) != known.end(), ErrorKind::Config,
            what + ": unknown key '" + key + "'");
}

template <typename T>
T field(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("key '") + key + "': " + e.what());
  }
}

}  // namespace

ExperimentSpec experiment_spec_from_json(const Json& j) {
  check_keys(j,
             {"task", "kind", "data", "solver", "config", "grid", "baseline", "opinions", "ratios", "corruption",
              "trials", "seed", "split", "threads", "oracle_select", "output"},
             "experiment spec");
  ExperimentSpec s;
  s.task = lookup_value<Task>(kTasks, field<std::string>(j, "task", "inpaint"), "task");
  s.kind = lookup_value<TaskKind>(kKinds, field<std::string>(j, "kind", "regression"), "task kind");

  require(j.contains("data"), ErrorKind::Config, "experiment spec: 'data' missing");
  const Json& data = j.at("data");
  check_keys(data, {"synthetic", "graph", "signals"}, "data");
  if (data.contains("synthetic")) s.synthetic = synthetic_spec_from_json(data.at("synthetic"));
  s.graph_path = field<std::string>(data, "graph", "");
  s.signals_path = field<std::string>(data, "signals", "");

  s.solver = solver_from_name(field<std::string>(j, "solver", "gtvr"));
  if (j.contains("config")) s.config = solver_config_from_json(j.at("config"));
  if (j.contains("grid")) s.grid = grid_from_json(s.config, j.at("grid"));

  if (j.contains("baseline")) {
    const Json& b = j.at("baseline");
    check_keys(b, {"solver", "config", "grid"}, "baseline");
    require(b.contains("solver"), ErrorKind::Config, "baseline: 'solver' missing");
    s.baseline = solver_from_name(b.at("solver").get<std::string>());
    if (b.contains("config")) s.baseline_config = solver_config_from_json(b.at("config"));
    if (b.contains("grid")) s.baseline_grid = grid_from_json(s.baseline_config, b.at("grid"));
  }

  if (j.contains("opinions")) {
    const Json& o = j.at("opinions");
    check_keys(o, {"experts", "easy_fraction", "easy_accuracy", "hard_accuracy", "method"}, "opinions");
    s.opinions.experts = field(o, "experts", s.opinions.experts);
    s.opinions.easy_fraction = field(o, "easy_fraction", s.opinions.easy_fraction);
    s.opinions.easy_accuracy = field(o, "easy_accuracy", s.opinions.easy_accuracy);
    s.opinions.hard_accuracy = field(o, "hard_accuracy", s.opinions.hard_accuracy);
    s.combine = combine_method_from_name(field<std::string>(o, "method", "gmcr-denoise"));
  }

  s.ratios = field(j, "ratios", s.ratios);
  s.corruption = field(j, "corruption", s.corruption);
  s.trials = field(j, "trials", s.trials);
  s.seed = field(j, "seed", s.seed);
  s.split = field(j, "split", s.split);
  s.threads = field(j, "threads", s.threads);
  s.oracle_select = field(j, "oracle_select", s.oracle_select);
  s.output = field<std::string>(j, "output", "");
  s.validate();
  return s;
}

Json to_json(const ExperimentSpec& s) {
  Json j;
  j["task"] = lookup_name(kTasks, s.task);
  j["kind"] = lookup_name(kKinds, s.kind);
  Json data = Json::object();
  if (s.synthetic) data["synthetic"] = to_json(*s.synthetic);
  if (!s.graph_path.empty()) data["graph"] = s.graph_path;
  if (!s.signals_path.empty()) data["signals"] = s.signals_path;
  j["data"] = data;
  j["solver"] = solver_name(s.solver);
  j["config"] = to_json(s.config);
  if (!s.grid.empty()) {
    Json g = Json::array();
    for (const auto& c : s.grid) g.push_back(to_json(c));
    j["grid"] = g;
  }
  if (s.baseline) {
    Json b;
    b["solver"] = solver_name(*s.baseline);
    b["config"] = to_json(s.baseline_config);
    if (!s.baseline_grid.empty()) {
      Json g = Json::array();
      for (const auto& c : s.baseline_grid) g.push_back(to_json(c));
      b["grid"] = g;
    }
    j["baseline"] = b;
  }
  if (s.task == Task::CombineOpinions) {
    j["opinions"] = {{"experts", s.opinions.experts},
                     {"easy_fraction", s.opinions.easy_fraction},
                     {"easy_accuracy", s.opinions.easy_accuracy},
                     {"hard_accuracy", s.opinions.hard_accuracy},
                     {"method", combine_method_name(s.combine)}};
  }
  j["ratios"] = s.ratios;
  j["corruption"] = s.corruption;
  j["trials"] = s.trials;
  j["seed"] = s.seed;
  j["split"] = s.split;
  j["threads"] = s.threads;
  j["oracle_select"] = s.oracle_select;
  if (!s.output.empty()) j["output"] = s.output;
  return j;
}

// ---------------------------------------------------------------------------

namespace {

struct Problem {
  SignalMatrix truth;
  SignalMatrix t;
  SignalMatrix e0;  // planted outliers (detect task)
};

struct Shared {
  const ExperimentSpec& spec;
  std::optional<GraphShift> shift;
  SignalMatrix file_signals;
};

/// Re-labels an error with the pipeline stage it came from.
template <typename F>
auto stage(const char* name, std::size_t ri, int trial, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    std::ostringstream msg;
    msg << "stage '" << name << "' (ratio " << ri << ", trial " << trial << "): " << e.what();
    throw Error(e.kind(), msg.str());
  }
}

Problem make_problem(const Shared& sh, std::uint64_t seed) {
  const ExperimentSpec& spec = sh.spec;
  Problem p;
  if (spec.synthetic) {
    SyntheticSpec s = *spec.synthetic;
    s.seed = seed;
    const SyntheticInstance inst = synth_instance(s, *sh.shift);
    p.truth = inst.x0;
    p.t = inst.t;
    p.e0 = inst.e;
  } else {
    p.truth = sh.file_signals;
    p.t = sh.file_signals;
    p.e0 = Matrix::Zero(p.t.rows(), p.t.cols());
  }
  if (spec.kind == TaskKind::Classification && spec.task != Task::Detect) {
    p.truth = p.truth.unaryExpr([](double v) { return threshold_label(v); });
    p.t = p.truth;
  }
  return p;
}

struct Selection {
  SolverConfig config;
  std::size_t index = 0;
};

Selection select_config(const ExperimentSpec& spec, SolverId solver, const SolverConfig& fixed,
                        const std::vector<SolverConfig>& grid, const Problem& p, const SignalMatrix& t,
                        const IndexMask& mask, const GraphShift& shift, std::uint64_t seed) {
  if (grid.empty()) return {fixed, 0};
  if (!spec.oracle_select) {
    const CvResult cv = cross_validate(t, mask, shift, solver, grid, spec.split, seed);
    return {cv.config, cv.best};
  }
  const IndexMask hidden = mask.is_full() ? mask : mask.complement();
  Selection best{grid.front(), 0};
  double best_score = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double score = compute_metrics(p.truth, run_solver(solver, t, mask, shift, grid[g]).x, spec.kind, hidden).mse;
    if (g == 0 || score < best_score) {
      best_score = score;
      best = {grid[g], g};
    }
  }
  return best;
}

TrialRow run_trial(const Shared& sh, std::size_t ri, int trial, std::uint64_t seed) {
  const ExperimentSpec& spec = sh.spec;
  const GraphShift& shift = *sh.shift;
  TrialRow row;
  row.ratio_index = ri;
  row.trial = trial;
  row.seed = seed;
  row.ratio = spec.ratios[ri];

  const Problem p = stage("data", ri, trial, [&] { return make_problem(sh, seed); });
  const Eigen::Index n = p.t.rows(), l = p.t.cols();

  if (spec.task == Task::CombineOpinions) {
    const Vector labels = p.truth.col(0);
    const Matrix opinions = stage("data", ri, trial, [&] { return simulate_opinions(labels, spec.opinions, seed); });
    const IndexMask full = IndexMask::full(n, 1);
    std::size_t chosen = 0;
    SolverConfig cfg = spec.config;
    if (!spec.grid.empty()) {
      stage("select", ri, trial, [&] {
        if (spec.oracle_select) {
          double best = -1.0;
          for (std::size_t g = 0; g < spec.grid.size(); ++g) {
            const double acc = compute_metrics(labels, combine_opinions(opinions, shift, spec.combine, spec.grid[g]),
                                               TaskKind::Classification)
                                   .acc;
            if (acc > best) {
              best = acc;
              chosen = g;
            }
          }
        } else {
          const SolverId denoiser = spec.combine == CombineMethod::GtvrDenoise ? SolverId::Gtvr : SolverId::Gmcr;
          chosen = cross_validate(opinions, IndexMask::full(n, opinions.cols()), shift, denoiser, spec.grid,
                                  spec.split, seed)
                       .best;
        }
        cfg = spec.grid[chosen];
      });
    }
    const Vector est = stage("solve", ri, trial, [&] { return combine_opinions(opinions, shift, spec.combine, cfg); });
    const Vector avg = combine_opinions(opinions, shift, CombineMethod::Average, cfg);
    row.metrics = compute_metrics(labels, est, TaskKind::Classification, full);
    row.baseline = compute_metrics(labels, avg, TaskKind::Classification, full);
    row.selected = chosen;
    return row;
  }

  IndexMask mask = IndexMask::full(n, l);
  if (spec.task != Task::Detect) mask = stage("mask", ri, trial, [&] { return sample_mask(n, l, row.ratio, seed); });

  SignalMatrix t = p.t;
  if (spec.corruption > 0.0) {
    const CorruptionKind kind =
        spec.kind == TaskKind::Classification ? CorruptionKind::FlipSign : CorruptionKind::Perturb;
    t = stage("corrupt", ri, trial, [&] { return corrupt_labels(t, mask, spec.corruption, seed, kind).t; });
  }

  const IndexMask scored = (spec.task == Task::Detect || mask.is_full()) ? IndexMask::full(n, l) : mask.complement();

  const Selection sel = stage("select", ri, trial, [&] {
    return select_config(spec, spec.solver, spec.config, spec.grid, p, t, mask, shift, seed);
  });
  const RecoveryResult r = stage("solve", ri, trial, [&] { return run_solver(spec.solver, t, mask, shift, sel.config); });

  row.metrics = compute_metrics(p.truth, r.x, spec.kind, scored);
  if (spec.task == Task::Detect) {
    // ACC scores support recovery of the outliers entry by entry.
    double hits = 0.0;
    for (Eigen::Index i = 0; i < p.e0.size(); ++i)
      hits += (p.e0.data()[i] != 0.0) == (r.e.data()[i] != 0.0) ? 1.0 : 0.0;
    row.metrics.acc = hits / static_cast<double>(p.e0.size());
  }
  row.iterations = r.iterations;
  row.converged = r.converged;
  row.selected = sel.index;

  if (spec.baseline) {
    const Selection bsel = stage("select", ri, trial, [&] {
      return select_config(spec, *spec.baseline, spec.baseline_config, spec.baseline_grid, p, t, mask, shift, seed);
    });
    const RecoveryResult b =
        stage("baseline", ri, trial, [&] { return run_solver(*spec.baseline, t, mask, shift, bsel.config); });
    row.baseline = compute_metrics(p.truth, b.x, spec.kind, scored);
    row.converged = row.converged && b.converged;
  }
  return row;
}

Json metrics_json(const Metrics& m) {
  return Json{{"acc", m.acc}, {"mse", m.mse}, {"rmse", m.rmse}, {"mae", m.mae}};
}

/// Mean ACC, MSE and MAE; RMSE is the square root of the mean MSE.
Metrics aggregate(const std::vector<Metrics>& ms) {
  Metrics out;
  for (const auto& m : ms) {
    out.acc += m.acc;
    out.mse += m.mse;
    out.mae += m.mae;
  }
  const double n = static_cast<double>(ms.size());
  out.acc /= n;
  out.mse /= n;
  out.mae /= n;
  out.rmse = std::sqrt(out.mse);
  return out;
}

std::string eigen_version() {
  return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  Shared sh{spec, std::nullopt, {}};
  if (spec.synthetic) {
    sh.shift = stage("graph", 0, 0, [&] { return synth_graph(*spec.synthetic); });
  } else {
    require(fs::exists(spec.graph_path), ErrorKind::Io, "graph file not found: " + spec.graph_path);
    require(fs::exists(spec.signals_path), ErrorKind::Io, "signals file not found: " + spec.signals_path);
    sh.shift = stage("graph", 0, 0, [&] { return read_graph(spec.graph_path); });
    sh.file_signals = stage("data", 0, 0, [&] { return read_matrix_csv(spec.signals_path); });
    require_node_count(sh.file_signals, *sh.shift, "signals");
  }

  struct Job {
    std::size_t ri;
    int trial;
  };
  std::vector<Job> jobs;
  for (std::size_t ri = 0; ri < spec.ratios.size(); ++ri)
    for (int k = 0; k < spec.trials; ++k) jobs.push_back({ri, k});

  std::vector<TrialRow> rows(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto [ri, k] = jobs[i];
      const std::uint64_t seed = Rng::stream(spec.seed, "trial", (static_cast<std::uint64_t>(ri) << 32) | k).next();
      const auto start = std::chrono::steady_clock::now();
      try {
        rows[i] = run_trial(sh, ri, k, seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
      rows[i].wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
  };
  const int n_threads = std::min<int>(spec.threads, static_cast<int>(jobs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentReport out;
  out.rows = std::move(rows);
  for (const auto& r : out.rows) out.all_converged = out.all_converged && r.converged;

  Json buckets = Json::array();
  for (std::size_t ri = 0; ri < spec.ratios.size(); ++ri) {
    std::vector<Metrics> ms, bs;
    bool converged = true;
    for (const auto& r : out.rows) {
      if (r.ratio_index != ri) continue;
      ms.push_back(r.metrics);
      if (r.baseline) bs.push_back(*r.baseline);
      converged = converged && r.converged;
    }
    Json b;
    b["ratio"] = spec.ratios[ri];
    b["trials"] = ms.size();
    b["metrics"] = metrics_json(aggregate(ms));
    if (!bs.empty()) b["baseline"] = metrics_json(aggregate(bs));
    b["converged"] = converged;
    buckets.push_back(b);
  }

  Json trials = Json::array();
  for (const auto& r : out.rows) {
    Json t;
    t["ratio"] = r.ratio;
    t["trial"] = r.trial;
    t["seed"] = r.seed;
    t["metrics"] = metrics_json(r.metrics);
    if (r.baseline) t["baseline"] = metrics_json(*r.baseline);
    t["iterations"] = r.iterations;
    t["converged"] = r.converged;
    t["selected"] = r.selected;
    trials.push_back(t);
  }

  Json& rep = out.report;
  rep["versions"] = {{"gsr", kVersion},
                     {"eigen", eigen_version()},
                     {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  rep["spec"] = to_json(spec);
  rep["selection"] = spec.grid.empty() ? "fixed" : (spec.oracle_select ? "oracle (uses ground truth)" : "cross-validation");
  rep["all_converged"] = out.all_converged;
  rep["buckets"] = buckets;
  rep["trials"] = trials;
  rep["timings"] = "timings.csv";
  return out;
}

std::string format_trials_csv(const ExperimentReport& report) {
  bool with_baseline = false;
  for (const auto& r : report.rows) with_baseline = with_baseline || r.baseline.has_value();
  std::ostringstream out;
  out << "seed,ratio,trial,acc,mse,rmse,mae,iterations,converged,selected";
  if (with_baseline) out << ",baseline_acc,baseline_mse,baseline_rmse,baseline_mae";
  out << '\n';
  for (const auto& r : report.rows) {
    out << r.seed << ',' << format_double(r.ratio) << ',' << r.trial << ',' << format_double(r.metrics.acc) << ','
        << format_double(r.metrics.mse) << ',' << format_double(r.metrics.rmse) << ','
        << format_double(r.metrics.mae) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
        << r.selected;
    if (with_baseline) {
      const Metrics b = r.baseline.value_or(Metrics{});
      out << ',' << format_double(b.acc) << ',' << format_double(b.mse) << ',' << format_double(b.rmse) << ','
          << format_double(b.mae);
    }
    out << '\n';
  }
  return out.str();
}

std::string format_timings_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "seed,ratio,trial,wall_ms\n";
  for (const auto& r : report.rows)
    out << r.seed << ',' << format_double(r.ratio) << ',' << r.trial << ',' << format_double(r.wall_ms) << '\n';
  return out.str();
}

void write_experiment(const ExperimentReport& report, const fs::path& dir) {
  write_text(dir / "report.json", report.report.dump(2) + "\n");
  write_text(dir / "trials.csv", format_trials_csv(report));
  write_text(dir / "timings.csv", format_timings_csv(report));
}

int experiment_exit_code(const ExperimentReport& report) { return report.all_converged ? 0 : 4; }

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::EmptyGrid:
    case ErrorKind::KTooLarge:
    case ErrorKind::NegativeThreshold:
      return 2;
    case ErrorKind::Io:
    case ErrorKind::Parse:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::NonBinaryInput:
    case ErrorKind::NonSymmetricLaplacian:
    case ErrorKind::EmptyMask:
    case ErrorKind::EmptyAccessibleSet:
    case ErrorKind::DegenerateDistances:
    case ErrorKind::NotNormalized:
    case ErrorKind::ZeroSpectralRadius:
    case ErrorKind::NotDiagonalizable:
    case ErrorKind::InconsistentInputs:
      return 3;
    default:
      return 1;
  }
}

}  // namespace gsr
