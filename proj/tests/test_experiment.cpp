#include <cmath>

#include "doctest.h"
#include "gsr/experiment.hpp"
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

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

ExperimentSpec small_inpaint_spec() {
  ExperimentSpec s;
  s.task = Task::Inpaint;
  SyntheticSpec syn;
  syn.n = 40;
  syn.noise = 0.05;
  s.synthetic = syn;
  s.solver = SolverId::Gtvr;
  for (double a : {0.1, 1.0, 10.0}) {
    SolverConfig c;
    c.alpha = a;
    s.grid.push_back(c);
  }
  s.baseline = SolverId::Lapr;
  s.ratios = {0.3, 0.7};
  s.trials = 3;
  s.seed = 17;
  return s;
}

/// Smooth +-1 labels on a synthetic k-NN graph.
struct LabelledGraph {
  GraphShift shift;
  Vector labels;
};

LabelledGraph blog_graph(std::uint64_t seed) {
  SyntheticSpec s;
  s.n = 200;
  s.components = 4;
  s.seed = seed;
  GraphShift g = synth_graph(s);
  const Vector x = smooth_signals(s, g).col(0);
  return {g, x.unaryExpr([](double v) { return threshold_label(v); })};
}

}  // namespace

TEST_CASE("metrics examples") {
  const Vector x = vec({1.0, -2.0, 0.5});
  const Metrics same = compute_metrics(x, x, TaskKind::Regression);
  CHECK(same.acc == 1.0);
  CHECK(same.mse == 0.0);
  CHECK(same.rmse == 0.0);
  CHECK(same.mae == 0.0);

  CHECK(compute_metrics(vec({1, -1}), vec({1, 1}), TaskKind::Classification).acc == 0.5);

  const Metrics m = compute_metrics(vec({0, 0}), vec({3, 4}), TaskKind::Regression);
  CHECK(m.mse == doctest::Approx(12.5));
  CHECK(m.rmse == doctest::Approx(std::sqrt(12.5)));
  CHECK(m.mae == doctest::Approx(3.5));
  CHECK(m.acc == 0.0);

  // Thresholding: zero maps to -1.
  CHECK(compute_metrics(vec({-1, 1}), vec({0.0, 1e-300}), TaskKind::Classification).acc == 1.0);
  CHECK(kind_of([] { compute_metrics(vec({1, 2}), vec({1}), TaskKind::Regression); }) ==
        ErrorKind::DimensionMismatch);

  // Restricted to a mask.
  const IndexMask on = IndexMask::from_nodes(3, {1});
  CHECK(compute_metrics(vec({0, 1, 0}), vec({5, 3, 5}), TaskKind::Regression, on).mse == doctest::Approx(4.0));
}

TEST_CASE("graph Laplacian and the LapR baseline") {
  std::mt19937_64 rng(1);
  const GraphShift g = test::random_weighted_shift(rng, 10);
  const Matrix l = graph_laplacian(g);
  CHECK((l - l.transpose()).norm() < 1e-14);
  CHECK(l.rowwise().sum().cwiseAbs().maxCoeff() < 1e-14);

  const Matrix t = test::random_matrix(rng, 10, 2);
  CHECK((laplacian_baseline(t, IndexMask::full(10, 2), l, 1e-12) - t).norm() < 1e-9);
  const Matrix c = Matrix::Constant(10, 1, 2.5);
  CHECK((laplacian_baseline(c, IndexMask::from_nodes(10, {0, 3}), l, 3.0) - c).norm() < 1e-10);

  // Path 0 - 1 - 2 with weights 1 and 2, node 1 hidden.
  Matrix lp(3, 3);
  lp << 1, -1, 0, -1, 3, -2, 0, -2, 2;
  const IndexMask mask = IndexMask::from_nodes(3, {0, 2});
  const Vector tp = vec({1.0, 0.0, 4.0});
  const double alpha = 0.5;
  Matrix h = alpha * lp;
  h(0, 0) += 1.0;
  h(2, 2) += 1.0;
  const Vector expected = oracle::quadratic_descent(h, vec({1.0, 0.0, 4.0}), 1e-13);
  CHECK((laplacian_baseline(tp, mask, lp, alpha).col(0) - expected).norm() < 1e-8);

  Matrix bad = lp;
  bad(0, 1) = 0.0;
  CHECK(kind_of([&] { laplacian_baseline(tp, mask, bad, alpha); }) == ErrorKind::NonSymmetricLaplacian);
}

TEST_CASE("run_solver dispatch") {
  std::mt19937_64 rng(2);
  const GraphShift g = test::random_weighted_shift(rng, 12);
  const Matrix t = test::random_matrix(rng, 12, 3);
  const IndexMask mask = sample_mask(12, 3, 0.6, 1);
  SolverConfig cfg;
  cfg.alpha = 0.7;
  cfg.beta = 0.2;
  // Column-wise gtvr equals gtvr on each column's own node mask.
  const Matrix x = run_solver(SolverId::Gtvr, t, mask, g, cfg).x;
  for (Eigen::Index c = 0; c < 3; ++c) {
    IndexMask m(12, 1);
    for (Eigen::Index r = 0; r < 12; ++r) m.set(r, 0, mask.accessible(r, c));
    CHECK((x.col(c) - gtvr(t.col(c), m, g, 0.7)).norm() < 1e-12);
  }
  for (SolverId id : {SolverId::Gtvm, SolverId::Gtvr, SolverId::GsrAdmm, SolverId::Gmcm, SolverId::Gmcr,
                      SolverId::Nuclear, SolverId::Rgtvr, SolverId::Lapr, SolverId::AnomalyDetect}) {
    CHECK(solver_from_name(solver_name(id)) == id);
    CHECK(run_solver(id, t, mask, g, cfg).x.allFinite());
  }
  CHECK(kind_of([] { solver_from_name("softimpute"); }) == ErrorKind::Config);
}

TEST_CASE("cross_validate") {
  std::mt19937_64 rng(3);
  const GraphShift g = test::random_regular_shift(rng, 15, 3);  // rows sum to one: constants are smooth
  const Matrix t = Matrix::Constant(15, 4, 2.0);
  const IndexMask mask = sample_mask(15, 4, 0.7, 5);

  SolverConfig only;
  only.alpha = 0.3;
  const CvResult one = cross_validate(t, mask, g, SolverId::Gmcr, {only}, 0.8, 1);
  CHECK(one.best == 0);
  CHECK(one.config.alpha == 0.3);

  // Heavy shrinkage loses to the exact reconstruction of a constant matrix.
  SolverConfig shrink, exact;
  shrink.beta = 50.0;
  exact.beta = 0.0;
  const CvResult two = cross_validate(t, mask, g, SolverId::Gmcr, {shrink, exact}, 0.8, 1);
  CHECK(two.best == 1);
  CHECK(two.scores[1] < 1e-8);
  CHECK(two.scores[0] > 1e-2);
  const CvResult again = cross_validate(t, mask, g, SolverId::Gmcr, {shrink, exact}, 0.8, 1);
  CHECK(again.scores == two.scores);

  // Equal scores: the first grid point wins.
  const CvResult tie = cross_validate(t, mask, g, SolverId::Gmcr, {exact, exact}, 0.8, 1);
  CHECK(tie.best == 0);

  CHECK(kind_of([&] { cross_validate(t, mask, g, SolverId::Gtvr, {}, 0.8, 1); }) == ErrorKind::EmptyGrid);
  CHECK(kind_of([&] { cross_validate(t, mask, g, SolverId::Gtvr, {only, only}, 1.0, 1); }) ==
        ErrorKind::InvalidArgument);
}

TEST_CASE("combine_opinions examples") {
  std::mt19937_64 rng(4);
  const GraphShift g = test::random_symmetric_shift(rng, 6);
  const Vector labels = vec({1, -1, -1, 1, 1, -1});
  const Matrix same = labels.replicate(1, 5);
  SolverConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 0.1;
  for (CombineMethod m : {CombineMethod::Average, CombineMethod::GtvrDenoise, CombineMethod::GmcrDenoise})
    CHECK(combine_opinions(same, g, m, cfg) == labels);

  Matrix votes(2, 3);
  votes << 1, 1, -1, -1, -1, 1;
  const GraphShift g2 = test::random_symmetric_shift(rng, 2);
  CHECK(combine_opinions(votes, g2, CombineMethod::Average, cfg) == vec({1, -1}));
  Matrix tie(2, 2);
  tie << 1, -1, -1, -1;
  CHECK(combine_opinions(tie, g2, CombineMethod::Average, cfg) == vec({1, -1}));

  Matrix bad = votes;
  bad(0, 0) = 0.5;
  CHECK(kind_of([&] { combine_opinions(bad, g2, CombineMethod::Average, cfg); }) == ErrorKind::NonBinaryInput);
  CHECK(combine_method_from_name("gtvr-denoise") == CombineMethod::GtvrDenoise);
}

TEST_CASE("simulated opinions follow the easy/hard accuracies") {
  const Vector labels = Vector::Ones(2000);
  OpinionSpec spec;
  spec.experts = 10;
  spec.easy_fraction = 0.5;
  const Matrix op = simulate_opinions(labels, spec, 3);
  // Overall accuracy is 0.5 * 0.9 + 0.5 * 0.3 = 0.6.
  const double acc = (op.array() > 0.0).cast<double>().mean();
  CHECK(acc == doctest::Approx(0.6).epsilon(0.02));
  CHECK(simulate_opinions(labels, spec, 3) == op);
}

TEST_CASE("opinion combination protocol: gmcr denoising matches or beats averaging") {
  OpinionSpec spec;
  spec.experts = 20;
  std::vector<SolverConfig> grid;
  for (double a : {1.0, 10.0}) {
    SolverConfig c;
    c.alpha = a;
    c.beta = 0.1;
    c.tol_outer = 1e-6;
    grid.push_back(c);
  }
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LabelledGraph lg = blog_graph(seed);
    spec.easy_fraction = 0.55 + 0.1 * static_cast<double>(seed % 4);
    const Matrix op = simulate_opinions(lg.labels, spec, seed);
    const double avg =
        compute_metrics(lg.labels, combine_opinions(op, lg.shift, CombineMethod::Average, grid[0]),
                        TaskKind::Classification)
            .acc;
    // Best over the grid, as the protocol reports.
    double best = 0.0;
    for (const auto& c : grid)
      best = std::max(best, compute_metrics(lg.labels, combine_opinions(op, lg.shift, CombineMethod::GmcrDenoise, c),
                                            TaskKind::Classification)
                                .acc);
    MESSAGE("seed " << seed << " avg " << avg << " gmcr " << best);
    wins += best >= avg ? 1 : 0;
  }
  CHECK(wins >= 8);
}

TEST_CASE("experiment spec json") {
  const ExperimentSpec s = small_inpaint_spec();
  const ExperimentSpec back = experiment_spec_from_json(to_json(s));
  CHECK(to_json(back) == to_json(s));
  CHECK(back.grid.size() == 3);
  CHECK(back.grid[2].alpha == 10.0);

  // Grid entries override the base config.
  Json j = to_json(s);
  j["config"] = {{"beta", 0.25}};
  j["grid"] = Json::array({Json{{"alpha", 2.0}}});
  const ExperimentSpec merged = experiment_spec_from_json(j);
  CHECK(merged.grid[0].alpha == 2.0);
  CHECK(merged.grid[0].beta == 0.25);

  Json bad = to_json(s);
  bad["trails"] = 3;
  CHECK(kind_of([&] { experiment_spec_from_json(bad); }) == ErrorKind::Config);
  bad = to_json(s);
  bad["ratios"] = {0.0};
  CHECK(kind_of([&] { experiment_spec_from_json(bad); }) == ErrorKind::Config);
  bad = to_json(s);
  bad["trials"] = 0;
  CHECK(kind_of([&] { experiment_spec_from_json(bad); }) == ErrorKind::Config);
  bad = to_json(s);
  bad["grid"] = Json::array();
  CHECK(kind_of([&] { experiment_spec_from_json(bad); }) == ErrorKind::EmptyGrid);
}

TEST_CASE("run_experiment with full information is exact") {
  ExperimentSpec s;
  SyntheticSpec syn;
  syn.n = 30;
  s.synthetic = syn;
  s.solver = SolverId::Gtvm;
  s.ratios = {1.0};
  const ExperimentReport r = run_experiment(s);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].metrics.acc == 1.0);
  CHECK(r.rows[0].metrics.mse == 0.0);
  CHECK(experiment_exit_code(r) == 0);
}

TEST_CASE("run_experiment rows, determinism and threads") {
  ExperimentSpec s = small_inpaint_spec();
  const ExperimentReport a = run_experiment(s);
  REQUIRE(a.rows.size() == 6);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const TrialRow& r = a.rows[i];
    CHECK(r.ratio_index == i / 3);
    CHECK(r.trial == static_cast<int>(i % 3));
    CHECK(std::abs(r.metrics.rmse * r.metrics.rmse - r.metrics.mse) <= 1e-12);
    CHECK(r.metrics.mae <= r.metrics.rmse + 1e-15);
    CHECK(r.baseline.has_value());
  }
  for (const auto& b : a.report["buckets"]) {
    const double mse = b["metrics"]["mse"].get<double>(), rmse = b["metrics"]["rmse"].get<double>();
    CHECK(std::abs(rmse * rmse - mse) <= 1e-12);
    CHECK(b["metrics"]["mae"].get<double>() <= rmse);
  }
  CHECK(a.report["selection"] == "cross-validation");

  s.threads = 4;
  const ExperimentReport b = run_experiment(s);
  CHECK(format_trials_csv(a) == format_trials_csv(b));
  CHECK(a.report["trials"] == b.report["trials"]);
  CHECK(a.report["buckets"] == b.report["buckets"]);

  s.seed = 18;
  CHECK(format_trials_csv(run_experiment(s)) != format_trials_csv(a));
}

TEST_CASE("run_experiment other tasks") {
  SyntheticSpec syn;
  syn.n = 30;

  ExperimentSpec det;
  det.task = Task::Detect;
  SyntheticSpec spiky = syn;
  spiky.outliers = 2;
  spiky.outlier_min = 10.0;
  spiky.outlier_max = 12.0;
  det.synthetic = spiky;
  det.solver = SolverId::AnomalyDetect;
  det.config.beta = 1.0;
  det.trials = 2;
  const ExperimentReport d = run_experiment(det);
  CHECK(d.rows.size() == 2);
  for (const auto& r : d.rows) CHECK(r.metrics.acc > 0.5);

  ExperimentSpec cls;
  cls.kind = TaskKind::Classification;
  cls.synthetic = syn;
  cls.solver = SolverId::Gtvr;
  cls.corruption = 0.2;
  cls.ratios = {0.5};
  const ExperimentReport c = run_experiment(cls);
  CHECK(c.rows[0].metrics.acc > 0.5);

  ExperimentSpec comp;
  comp.task = Task::Complete;
  SyntheticSpec mat = syn;
  mat.l = 6;
  mat.rank = 2;
  comp.synthetic = mat;
  comp.solver = SolverId::Gmcr;
  comp.config.beta = 0.05;
  comp.baseline = SolverId::Nuclear;
  comp.baseline_config.beta = 0.05;
  comp.ratios = {0.5};
  CHECK(run_experiment(comp).rows[0].baseline.has_value());

  ExperimentSpec op;
  op.task = Task::CombineOpinions;
  op.kind = TaskKind::Classification;
  op.synthetic = syn;
  op.combine = CombineMethod::GmcrDenoise;
  op.config.beta = 0.1;
  op.grid = {op.config, op.config};
  op.grid[1].alpha = 10.0;
  op.oracle_select = true;
  op.ratios = {1.0};
  const ExperimentReport o = run_experiment(op);
  CHECK(o.report["selection"] == "oracle (uses ground truth)");
  CHECK(o.rows[0].baseline.has_value());
}

TEST_CASE("non-convergence and errors surface with exit codes") {
  ExperimentSpec s;
  SyntheticSpec syn;
  syn.n = 20;
  syn.l = 4;
  syn.rank = 2;
  s.synthetic = syn;
  s.task = Task::Complete;
  s.solver = SolverId::Gmcr;
  s.config.beta = 0.1;
  s.config.max_outer = 2;
  s.ratios = {0.5};
  const ExperimentReport r = run_experiment(s);
  CHECK_FALSE(r.all_converged);
  CHECK(experiment_exit_code(r) == 4);

  ExperimentSpec f;
  f.graph_path = "/nonexistent/graph.csv";
  f.signals_path = "/nonexistent/signals.csv";
  try {
    run_experiment(f);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(exit_code_for(e) == 3);
  }
  CHECK(exit_code_for(Error(ErrorKind::Config, "x")) == 2);
}

TEST_CASE("file-backed experiment") {
  const fs::path dir = fs::temp_directory_path() / "gsr_test_experiment";
  fs::remove_all(dir);
  SyntheticSpec syn;
  syn.n = 25;
  syn.seed = 1;
  const GraphShift g = synth_graph(syn);
  write_graph(dir / "graph.csv", g);
  write_matrix_csv(dir / "x.csv", smooth_signals(syn, g));

  ExperimentSpec s;
  s.graph_path = (dir / "graph.csv").string();
  s.signals_path = (dir / "x.csv").string();
  s.ratios = {0.6};
  s.trials = 2;
  const ExperimentReport r = run_experiment(s);
  write_experiment(r, dir / "out");
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(read_text(dir / "out" / "trials.csv") == format_trials_csv(r));
  CHECK(fs::exists(dir / "out" / "timings.csv"));
  fs::remove_all(dir);
}
