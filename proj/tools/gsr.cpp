// Command-line front end.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gsr/analysis.hpp"
#include "gsr/experiment.hpp"

using namespace gsr;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  int threads = 1;
  bool oracle_select = false;
};

Json load_config(const Globals& g) {
  if (g.config.empty()) return Json::object();
  try {
    return parse_json(read_text(g.config), g.config);
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
}

SolverConfig solver_config(const Globals& g) {
  const Json j = load_config(g);
  return solver_config_from_json(j);
}

/// Writes `j` to <out>/<name> or prints it.
void emit(const Globals& g, const std::string& name, const Json& j) {
  if (g.out.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_text(fs::path(g.out) / name, j.dump(2) + "\n");
}

void emit_matrix(const Globals& g, const std::string& name, const Matrix& m) {
  if (!g.out.empty()) write_matrix_csv(fs::path(g.out) / name, m);
}

IndexMask load_mask(const std::string& path, const Matrix& t) {
  if (path.empty()) return IndexMask::full(t.rows(), t.cols());
  return read_mask(path, t.rows(), t.cols());
}

int result_code(const RecoveryResult& r) { return r.converged ? 0 : 4; }

// Overrides a config field when the flag was given on the command line.
void maybe(const CLI::App* cmd, const char* flag, double value, double& field) {
  if (cmd->count(flag) > 0) field = value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph signal recovery toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads for trial sweeps")->check(CLI::PositiveNumber);
  app.add_flag("--oracle-select", g.oracle_select, "Pick grid points against the ground truth");

  int code = 0;

  // build-graph ------------------------------------------------------------
  auto* build = app.add_subcommand("build-graph", "k-NN graph from a feature table");
  std::string features, observed, distances;
  int k = 8;
  std::string metric, normalization, missing;
  bool symmetrize = false;
  build->add_option("--features", features, "N x d feature CSV");
  build->add_option("--observed", observed, "Mask CSV of observed features");
  build->add_option("--distances", distances, "Precomputed N x N distance CSV");
  build->add_option("--k", k, "Neighbors per node");
  build->add_option("--metric", metric, "l2 | l1 | precomputed");
  build->add_option("--normalization", normalization, "row | column");
  build->add_option("--missing", missing, "mean-distance | pair-exclusion");
  build->add_flag("--symmetrize", symmetrize, "Symmetrize before normalizing");
  build->callback([&] {
    Json j = load_config(g);
    if (build->count("--k")) j["k"] = k;
    if (!metric.empty()) j["metric"] = metric;
    if (!normalization.empty()) j["normalization"] = normalization;
    if (!missing.empty()) j["missing"] = missing;
    if (symmetrize) j["symmetrize"] = true;
    GraphBuildSpec spec = graph_build_spec_from_json(j);
    FeatureTable table;
    if (!distances.empty()) {
      table.distances = read_matrix_csv(distances);
      spec.metric = DistanceMetric::Precomputed;
      table.features = Matrix::Zero(table.distances->rows(), 1);
    } else {
      require(!features.empty(), ErrorKind::Config, "build-graph needs --features or --distances");
      table.features = read_matrix_csv(features);
    }
    if (!observed.empty()) table.observed = read_mask(observed, table.features.rows(), table.features.cols());
    const GraphShift shift = build_knn_graph(table, spec);
    require(!g.out.empty(), ErrorKind::Config, "build-graph needs --out");
    write_graph(fs::path(g.out) / "graph.csv", shift);
  });

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Synthetic graph, signals and mask");
  synth->callback([&] {
    SyntheticSpec spec = synthetic_spec_from_json(load_config(g));
    if (g.seed) spec.seed = *g.seed;
    require(!g.out.empty(), ErrorKind::Config, "synth needs --out");
    const GraphShift shift = synth_graph(spec);
    const SyntheticInstance inst = synth_instance(spec, shift);
    const IndexMask mask = sample_mask(spec.n, spec.l, spec.ratio, spec.seed);
    write_bundle(g.out, Bundle{shift, inst, mask, spec});
  });

  // solver subcommands share these inputs -----------------------------------
  std::string graph, signals, mask_path;
  std::string inpaint_method, complete_method, combine_method;
  double alpha = 0, beta = 0, gamma = 0, epsilon = 0, eta = 0;
  auto add_inputs = [&](CLI::App* cmd, bool with_mask) {
    cmd->add_option("--graph", graph, "Graph CSV")->required();
    cmd->add_option("--signals", signals, "Observed signals CSV (N x L)")->required();
    if (with_mask) cmd->add_option("--mask", mask_path, "Accessible entries CSV (default: all)");
  };
  auto run_and_emit = [&](SolverId id, const SolverConfig& cfg, bool with_mask) {
    const GraphShift shift = read_graph(graph);
    const Matrix t = read_matrix_csv(signals);
    const IndexMask mask = with_mask ? load_mask(mask_path, t) : IndexMask::full(t.rows(), t.cols());
    const RecoveryResult r = run_solver(id, t, mask, shift, cfg);
    emit(g, "result.json", to_json(r));
    emit_matrix(g, "x.csv", r.x);
    emit_matrix(g, "e.csv", r.e);
    code = result_code(r);
  };

  auto* inpaint = app.add_subcommand("inpaint", "Graph signal inpainting");
  add_inputs(inpaint, true);
  inpaint->add_option("--method", inpaint_method, "gtvm | gtvr | constrained | lapr | gsr-admm")->default_val("gtvr");
  inpaint->add_option("--alpha", alpha, "Variation weight");
  inpaint->add_option("--epsilon", epsilon, "Noise budget (constrained)");
  inpaint->callback([&] {
    SolverConfig cfg = solver_config(g);
    maybe(inpaint, "--alpha", alpha, cfg.alpha);
    maybe(inpaint, "--epsilon", epsilon, cfg.epsilon);
    if (inpaint_method != "constrained") return run_and_emit(solver_from_name(inpaint_method), cfg, true);
    const GraphShift shift = read_graph(graph);
    const Matrix t = read_matrix_csv(signals);
    const IndexMask mask = load_mask(mask_path, t);
    Matrix x(t.rows(), t.cols());
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      IndexMask m(t.rows(), 1);
      for (Eigen::Index r = 0; r < t.rows(); ++r) m.set(r, 0, mask.accessible(r, c));
      x.col(c) = inpaint_constrained(t.col(c), m, shift, cfg.epsilon);
    }
    emit(g, "result.json", Json{{"x", matrix_to_json(x)}});
    emit_matrix(g, "x.csv", x);
  });

  auto* complete = app.add_subcommand("complete", "Graph signal matrix completion");
  add_inputs(complete, true);
  complete->add_option("--method", complete_method, "gmcm | gmcr | nuclear | gsr-admm")->default_val("gmcr");
  complete->add_option("--alpha", alpha, "Variation weight");
  complete->add_option("--beta", beta, "Nuclear-norm weight");
  complete->callback([&] {
    SolverConfig cfg = solver_config(g);
    maybe(complete, "--alpha", alpha, cfg.alpha);
    maybe(complete, "--beta", beta, cfg.beta);
    run_and_emit(solver_from_name(complete_method), cfg, true);
  });

  auto* detect = app.add_subcommand("detect", "Anomaly detection");
  add_inputs(detect, false);
  detect->add_option("--beta", beta, "Sparsity weight");
  detect->add_option("--eta", eta, "Smoothness budget; switches to the constrained form");
  detect->callback([&] {
    SolverConfig cfg = solver_config(g);
    maybe(detect, "--beta", beta, cfg.beta);
    if (!detect->count("--eta")) return run_and_emit(SolverId::AnomalyDetect, cfg, false);
    const GraphShift shift = read_graph(graph);
    const Matrix t = read_matrix_csv(signals);
    require(t.cols() == 1, ErrorKind::DimensionMismatch, "constrained detection takes one signal");
    const ConstrainedDetection d = anomaly_detect_constrained(t.col(0), shift, eta, cfg);
    Json j = to_json(d.result);
    j["beta"] = d.beta;
    emit(g, "result.json", j);
    emit_matrix(g, "x.csv", d.result.x);
    emit_matrix(g, "e.csv", d.result.e);
    code = result_code(d.result);
  });

  auto* robust = app.add_subcommand("robust", "Robust inpainting");
  add_inputs(robust, true);
  robust->add_option("--alpha", alpha, "Variation weight");
  robust->add_option("--gamma", gamma, "Outlier weight");
  robust->callback([&] {
    SolverConfig cfg = solver_config(g);
    maybe(robust, "--alpha", alpha, cfg.alpha);
    maybe(robust, "--gamma", gamma, cfg.gamma);
    run_and_emit(SolverId::Rgtvr, cfg, true);
  });

  // combine ----------------------------------------------------------------
  auto* combine = app.add_subcommand("combine", "Combine +-1 expert opinions");
  std::string opinions_path, truth_path;
  std::vector<double> alphas;
  combine->add_option("--graph", graph, "Graph CSV")->required();
  combine->add_option("--opinions", opinions_path, "N x K opinion CSV")->required();
  combine->add_option("--method", combine_method, "avg | gtvr-denoise | gmcr-denoise")->default_val("gmcr-denoise");
  combine->add_option("--alpha", alpha, "Variation weight");
  combine->add_option("--beta", beta, "Nuclear-norm weight");
  combine->add_option("--alphas", alphas, "Alpha grid for --oracle-select");
  combine->add_option("--truth", truth_path, "Ground-truth labels (N x 1)");
  combine->callback([&] {
    SolverConfig cfg = solver_config(g);
    maybe(combine, "--alpha", alpha, cfg.alpha);
    maybe(combine, "--beta", beta, cfg.beta);
    const GraphShift shift = read_graph(graph);
    const Matrix op = read_matrix_csv(opinions_path);
    const CombineMethod m = combine_method_from_name(combine_method);
    std::optional<Matrix> truth;
    if (!truth_path.empty()) truth = read_matrix_csv(truth_path);
    Json j;
    if (g.oracle_select) {
      require(truth.has_value(), ErrorKind::Config, "--oracle-select needs --truth");
      require(!alphas.empty(), ErrorKind::Config, "--oracle-select needs --alphas");
      double best = -1.0;
      for (double a : alphas) {
        SolverConfig c = cfg;
        c.alpha = a;
        const double acc =
            compute_metrics(*truth, combine_opinions(op, shift, m, c), TaskKind::Classification).acc;
        if (acc > best) {
          best = acc;
          cfg.alpha = a;
        }
      }
      j["selection"] = "oracle (uses ground truth)";
    }
    const Vector labels = combine_opinions(op, shift, m, cfg);
    j["method"] = combine_method;
    j["alpha"] = cfg.alpha;
    j["labels"] = matrix_to_json(labels);
    if (truth) {
      const Metrics mt = compute_metrics(*truth, labels, TaskKind::Classification);
      j["acc"] = mt.acc;
    }
    emit(g, "combine.json", j);
    emit_matrix(g, "labels.csv", labels);
  });

  // eval -------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Score an estimate against the truth");
  std::string estimate_path, kind = "regression";
  eval->add_option("--truth", truth_path, "Ground truth CSV")->required();
  eval->add_option("--estimate", estimate_path, "Estimate CSV")->required();
  eval->add_option("--mask", mask_path, "Accessible entries; scoring uses the rest");
  eval->add_option("--kind", kind, "regression | classification")->default_val("regression");
  eval->callback([&] {
    const Matrix truth = read_matrix_csv(truth_path);
    const Matrix est = read_matrix_csv(estimate_path);
    require(kind == "regression" || kind == "classification", ErrorKind::Config, "unknown kind '" + kind + "'");
    const TaskKind tk = kind == "regression" ? TaskKind::Regression : TaskKind::Classification;
    IndexMask on = IndexMask::full(truth.rows(), truth.cols());
    if (!mask_path.empty()) on = read_mask(mask_path, truth.rows(), truth.cols()).complement();
    const Metrics m = compute_metrics(truth, est, tk, on);
    emit(g, "metrics.json", Json{{"acc", m.acc}, {"mse", m.mse}, {"rmse", m.rmse}, {"mae", m.mae}});
  });

  // run --------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Run an experiment spec");
  std::string spec_path;
  run->add_option("spec", spec_path, "Experiment spec JSON (or use --config)");
  run->callback([&] {
    const std::string path = spec_path.empty() ? g.config : spec_path;
    require(!path.empty(), ErrorKind::Config, "run needs a spec file");
    ExperimentSpec spec;
    try {
      spec = experiment_spec_from_json(parse_json(read_text(path), path));
      if (g.seed) spec.seed = *g.seed;
      if (app.count("--threads")) spec.threads = g.threads;
      if (g.oracle_select) spec.oracle_select = true;
      if (!g.out.empty()) spec.output = g.out;
      require(!spec.output.empty(), ErrorKind::Config, "run needs --out or an 'output' entry");
      spec.validate();
    } catch (const Error& e) {
      fail(ErrorKind::Config, e.what());
    }
    const ExperimentReport report = run_experiment(spec);
    write_experiment(report, spec.output);
    code = experiment_exit_code(report);
  });

  // bounds -----------------------------------------------------------------
  auto* bounds = app.add_subcommand("bounds", "Randomized checks of the bounds and identities");
  std::string suite = "all";
  int draws = 100;
  bounds->add_option("--suite", suite, "tv-svd | nuclear | subspace | inpainting | k-norm | all");
  bounds->add_option("--draws", draws, "Draws per suite")->check(CLI::PositiveNumber);
  bounds->callback([&] {
    SuiteOptions opt;
    opt.draws = draws;
    opt.seed = g.seed.value_or(0);
    const std::vector<std::pair<std::string, std::vector<SuiteRow> (*)(const SuiteOptions&)>> suites = {
        {"tv-svd", tv_svd_suite},         {"nuclear", nuclear_tv_suite}, {"subspace", subspace_suite},
        {"inpainting", inpainting_suite}, {"k-norm", k_norm_suite},
    };
    Json summary = Json::object();
    bool found = false;
    for (const auto& [name, fn] : suites) {
      if (suite != "all" && suite != name) continue;
      found = true;
      const auto rows = fn(opt);
      std::size_t failures = 0;
      double worst = rows.empty() ? 0.0 : rows.front().margin;
      for (const auto& r : rows) {
        failures += r.margin < 0.0 ? 1 : 0;
        worst = std::min(worst, r.margin);
      }
      summary[name] = {{"draws", rows.size()}, {"failures", failures}, {"min_margin", worst}};
      if (!g.out.empty()) {
        std::ostringstream csv;
        write_suite_csv(csv, rows);
        write_text(fs::path(g.out) / (name + ".csv"), csv.str());
      }
    }
    require(found, ErrorKind::Config, "unknown suite '" + suite + "'");
    emit(g, "bounds.json", summary);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return code;
}
