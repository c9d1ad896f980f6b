#include "gsr/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace gsr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parses(std::string_view field) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  return ec == std::errc() && ptr == field.data() + field.size();
}

/// Non-empty lines with their 1-based line numbers; a leading header is dropped.
std::vector<std::pair<int, std::vector<std::string_view>>> csv_rows(std::string_view text) {
  std::vector<std::pair<int, std::vector<std::string_view>>> rows;
  int number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    const std::string_view line = trim(text.substr(start, end == std::string_view::npos ? text.size() - start : end - start));
    ++number;
    if (!line.empty()) {
      auto fields = split(line, ',');
      const bool header = rows.empty() && std::none_of(fields.begin(), fields.end(), parses);
      if (!header) rows.emplace_back(number, std::move(fields));
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return rows;
}

std::string where(const std::string& origin, int line) { return origin + ":" + std::to_string(line); }

double parse_double(std::string_view field, const std::string& origin, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  require(ec == std::errc() && ptr == field.data() + field.size(), ErrorKind::Parse,
          where(origin, line) + ": not a number: '" + std::string(field) + "'");
  require(std::isfinite(v), ErrorKind::Parse, where(origin, line) + ": non-finite value '" + std::string(field) + "'");
  return v;
}

Eigen::Index parse_index(std::string_view field, const std::string& origin, int line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  require(ec == std::errc() && ptr == field.data() + field.size() && v >= 0, ErrorKind::Parse,
          where(origin, line) + ": expected a nonnegative integer, got '" + std::string(field) + "'");
  return static_cast<Eigen::Index>(v);
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("key '") + key + "': " + e.what());
  }
}

void reject_unknown(const Json& j, const std::set<std::string>& known, const char* what) {
  require(j.is_object(), ErrorKind::Config, std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    require(known.count(key) > 0, ErrorKind::Config, std::string(what) + ": unknown key '" + key + "'");
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------

Matrix parse_matrix_csv(std::string_view text, const std::string& origin) {
  const auto rows = csv_rows(text);
  require(!rows.empty(), ErrorKind::Parse, origin + ": empty matrix");
  const auto cols = static_cast<Eigen::Index>(rows.front().second.size());
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [line, fields] = rows[i];
    require(static_cast<Eigen::Index>(fields.size()) == cols, ErrorKind::Parse,
            where(origin, line) + ": expected " + std::to_string(cols) + " fields, got " +
                std::to_string(fields.size()));
    for (Eigen::Index j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), j) = parse_double(fields[static_cast<std::size_t>(j)], origin, line);
  }
  return m;
}

std::string format_matrix_csv(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Matrix read_matrix_csv(const fs::path& path) { return parse_matrix_csv(read_text(path), path.string()); }

void write_matrix_csv(const fs::path& path, const Matrix& m) { write_text(path, format_matrix_csv(m)); }

// ---------------------------------------------------------------------------

fs::path graph_sidecar(const fs::path& graph_path) {
  fs::path side = graph_path;
  side.replace_extension(".json");
  return side;
}

GraphShift read_graph(const fs::path& path, bool normalize) {
  const fs::path side = graph_sidecar(path);
  const std::string text = read_text(path);
  if (!fs::exists(side)) {
    Matrix a = parse_matrix_csv(text, path.string());
    require(a.rows() == a.cols(), ErrorKind::Parse, path.string() + ": dense graph must be square");
    GraphShift raw(std::move(a));
    return normalize ? normalize_shift(raw) : raw;
  }

  const Json meta = parse_json(read_text(side), side.string());
  reject_unknown(meta, {"n", "normalized"}, "graph sidecar");
  require(meta.contains("n"), ErrorKind::Parse, side.string() + ": missing 'n'");
  const auto n = get_or<long long>(meta, "n", 0);
  require(n >= 1, ErrorKind::Parse, side.string() + ": 'n' must be positive");
  const bool normalized = get_or<bool>(meta, "normalized", false);

  Matrix a = Matrix::Zero(n, n);
  std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
  for (const auto& [line, fields] : csv_rows(text)) {
    require(fields.size() == 3, ErrorKind::Parse, where(path.string(), line) + ": expected src,dst,weight");
    const Eigen::Index src = parse_index(fields[0], path.string(), line);
    const Eigen::Index dst = parse_index(fields[1], path.string(), line);
    require(src < n && dst < n, ErrorKind::Parse, where(path.string(), line) + ": node index out of range");
    require(seen.emplace(src, dst).second, ErrorKind::Parse, where(path.string(), line) + ": duplicate edge");
    a(dst, src) = parse_double(fields[2], path.string(), line);
  }
  if (normalized) return GraphShift::assume_normalized(std::move(a));
  GraphShift raw(std::move(a));
  return normalize ? normalize_shift(raw) : raw;
}

void write_graph(const fs::path& path, const GraphShift& shift) {
  const Matrix& a = shift.weights();
  std::string out = "src,dst,weight\n";
  for (Eigen::Index src = 0; src < a.cols(); ++src)
    for (Eigen::Index dst = 0; dst < a.rows(); ++dst)
      if (a(dst, src) != 0.0)
        out += std::to_string(src) + "," + std::to_string(dst) + "," + format_double(a(dst, src)) + "\n";
  write_text(path, out);
  Json meta;
  meta["n"] = shift.size();
  meta["normalized"] = shift.normalized();
  write_text(graph_sidecar(path), meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

IndexMask parse_mask_csv(std::string_view text, Eigen::Index rows, Eigen::Index cols, const std::string& origin) {
  IndexMask mask(rows, cols);
  for (const auto& [line, fields] : csv_rows(text)) {
    require(fields.size() == 1 || fields.size() == 2, ErrorKind::Parse, where(origin, line) + ": expected row,col");
    const Eigen::Index r = parse_index(fields[0], origin, line);
    const Eigen::Index c = fields.size() == 2 ? parse_index(fields[1], origin, line) : 0;
    require(r < rows && c < cols, ErrorKind::Parse, where(origin, line) + ": mask entry out of range");
    mask.set(r, c, true);
  }
  return mask;
}

IndexMask read_mask(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
  return parse_mask_csv(read_text(path), rows, cols, path.string());
}

void write_mask(const fs::path& path, const IndexMask& mask) {
  std::string out = "row,col\n";
  for (const auto& [r, c] : mask.entries()) out += std::to_string(r) + "," + std::to_string(c) + "\n";
  write_text(path, out);
}

// ---------------------------------------------------------------------------

Json parse_json(std::string_view text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, origin + ": " + e.what());
  }
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
  require(j.is_array() && !j.empty(), ErrorKind::Parse, what + ": expected a non-empty array of rows");
  const std::size_t cols = j.front().size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_array() && j[i].size() == cols, ErrorKind::Parse, what + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      require(j[i][c].is_number(), ErrorKind::Parse, what + ": non-numeric entry");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
  }
  require_finite(m, what.c_str());
  return m;
}

Json to_json(const SolverConfig& cfg) {
  Json j;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["gamma"] = cfg.gamma;
  j["epsilon"] = cfg.epsilon;
  j["penalty"] = cfg.penalty;
  j["tol_outer"] = cfg.tol_outer;
  j["tol_inner"] = cfg.tol_inner;
  j["max_outer"] = cfg.max_outer;
  j["max_inner"] = cfg.max_inner;
  j["step"] = {{"t0", cfg.step.initial_step},
               {"rho", cfg.step.shrink},
               {"c", cfg.step.sufficient_decrease},
               {"max_halvings", cfg.step.max_halvings}};
  return j;
}

SolverConfig solver_config_from_json(const Json& j) {
  reject_unknown(j, {"alpha", "beta", "gamma", "epsilon", "penalty", "tol_outer", "tol_inner", "max_outer",
                     "max_inner", "step"},
                 "solver config");
  SolverConfig cfg;
  cfg.alpha = get_or(j, "alpha", cfg.alpha);
  cfg.beta = get_or(j, "beta", cfg.beta);
  cfg.gamma = get_or(j, "gamma", cfg.gamma);
  cfg.epsilon = get_or(j, "epsilon", cfg.epsilon);
  cfg.penalty = get_or(j, "penalty", cfg.penalty);
  cfg.tol_outer = get_or(j, "tol_outer", cfg.tol_outer);
  cfg.tol_inner = get_or(j, "tol_inner", cfg.tol_inner);
  cfg.max_outer = get_or(j, "max_outer", cfg.max_outer);
  cfg.max_inner = get_or(j, "max_inner", cfg.max_inner);
  if (j.contains("step")) {
    const Json& s = j.at("step");
    reject_unknown(s, {"t0", "rho", "c", "max_halvings"}, "step");
    cfg.step.initial_step = get_or(s, "t0", cfg.step.initial_step);
    cfg.step.shrink = get_or(s, "rho", cfg.step.shrink);
    cfg.step.sufficient_decrease = get_or(s, "c", cfg.step.sufficient_decrease);
    cfg.step.max_halvings = get_or(s, "max_halvings", cfg.step.max_halvings);
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  return cfg;
}

Json to_json(const RecoveryResult& r) {
  Json j;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["threads"] = r.threads;
  j["residual"] = r.residual;
  j["trace"] = r.trace;
  j["x"] = matrix_to_json(r.x);
  if (r.w.size()) j["w"] = matrix_to_json(r.w);
  if (r.e.size()) j["e"] = matrix_to_json(r.e);
  return j;
}

namespace {

const std::map<std::string, SmoothRecipe> kRecipes{{"low-frequency", SmoothRecipe::LowFrequency},
                                                     {"diffusion", SmoothRecipe::Diffusion}};
const std::map<std::string, DistanceMetric> kMetrics{
    {"l2", DistanceMetric::L2}, {"l1", DistanceMetric::L1}, {"precomputed", DistanceMetric::Precomputed}};
const std::map<std::string, ShiftNormalization> kNormalizations{{"row", ShiftNormalization::Row},
                                                                  {"column", ShiftNormalization::Column}};
const std::map<std::string, MissingPolicy> kPolicies{{"mean-distance", MissingPolicy::MeanDistance},
                                                       {"pair-exclusion", MissingPolicy::PairExclusion}};

template <typename E>
std::string name_of(const std::map<std::string, E>& table, E value) {
  for (const auto& [k, v] : table)
    if (v == value) return k;
  return "?";
}

template <typename E>
E enum_from(const Json& j, const char* key, const std::map<std::string, E>& table, E fallback) {
  if (!j.contains(key)) return fallback;
  const auto name = get_or<std::string>(j, key, "");
  const auto it = table.find(name);
  require(it != table.end(), ErrorKind::Config, std::string("unknown value '") + name + "' for '" + key + "'");
  return it->second;
}

}  // namespace

Json to_json(const SyntheticSpec& spec) {
  Json j;
  j["n"] = spec.n;
  j["l"] = spec.l;
  j["recipe"] = name_of(kRecipes, spec.recipe);
  j["components"] = spec.components;
  j["diffusion_steps"] = spec.diffusion_steps;
  j["rank"] = spec.rank;
  j["noise"] = spec.noise;
  j["outliers"] = spec.outliers;
  j["outlier_min"] = spec.outlier_min;
  j["outlier_max"] = spec.outlier_max;
  j["relative_outliers"] = spec.relative_outliers;
  j["graph_k"] = spec.graph_k;
  j["ratio"] = spec.ratio;
  j["seed"] = spec.seed;
  return j;
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
  reject_unknown(j, {"n", "l", "recipe", "components", "diffusion_steps", "rank", "noise", "outliers", "outlier_min",
                     "outlier_max", "relative_outliers", "graph_k", "ratio", "seed"},
                 "synthetic spec");
  SyntheticSpec s;
  s.n = get_or<Eigen::Index>(j, "n", s.n);
  s.l = get_or<Eigen::Index>(j, "l", s.l);
  s.recipe = enum_from(j, "recipe", kRecipes, s.recipe);
  s.components = get_or(j, "components", s.components);
  s.diffusion_steps = get_or(j, "diffusion_steps", s.diffusion_steps);
  s.rank = get_or(j, "rank", s.rank);
  s.noise = get_or(j, "noise", s.noise);
  s.outliers = get_or(j, "outliers", s.outliers);
  s.outlier_min = get_or(j, "outlier_min", s.outlier_min);
  s.outlier_max = get_or(j, "outlier_max", s.outlier_max);
  s.relative_outliers = get_or(j, "relative_outliers", s.relative_outliers);
  s.graph_k = get_or(j, "graph_k", s.graph_k);
  s.ratio = get_or(j, "ratio", s.ratio);
  s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
  s.validate();
  return s;
}

Json to_json(const GraphBuildSpec& spec) {
  Json j;
  j["k"] = spec.k;
  j["metric"] = name_of(kMetrics, spec.metric);
  j["normalization"] = name_of(kNormalizations, spec.normalization);
  j["symmetrize"] = spec.symmetrize;
  j["missing"] = name_of(kPolicies, spec.missing);
  return j;
}

GraphBuildSpec graph_build_spec_from_json(const Json& j) {
  reject_unknown(j, {"k", "metric", "normalization", "symmetrize", "missing"}, "graph build spec");
  GraphBuildSpec s;
  s.k = get_or(j, "k", s.k);
  s.metric = enum_from(j, "metric", kMetrics, s.metric);
  s.normalization = enum_from(j, "normalization", kNormalizations, s.normalization);
  s.symmetrize = get_or(j, "symmetrize", s.symmetrize);
  s.missing = enum_from(j, "missing", kPolicies, s.missing);
  return s;
}

// ---------------------------------------------------------------------------

void write_bundle(const fs::path& dir, const Bundle& bundle) {
  fs::create_directories(dir);
  write_graph(dir / "graph.csv", bundle.shift);
  write_matrix_csv(dir / "X0.csv", bundle.instance.x0);
  write_matrix_csv(dir / "W.csv", bundle.instance.w);
  write_matrix_csv(dir / "E.csv", bundle.instance.e);
  write_matrix_csv(dir / "T.csv", bundle.instance.t);
  write_mask(dir / "mask.csv", bundle.mask);
  write_text(dir / "spec.json", to_json(bundle.spec).dump(2) + "\n");
}

Bundle read_bundle(const fs::path& dir) {
  SyntheticInstance inst;
  inst.x0 = read_matrix_csv(dir / "X0.csv");
  inst.w = read_matrix_csv(dir / "W.csv");
  inst.e = read_matrix_csv(dir / "E.csv");
  inst.t = read_matrix_csv(dir / "T.csv");
  IndexMask mask = read_mask(dir / "mask.csv", inst.t.rows(), inst.t.cols());
  SyntheticSpec spec = synthetic_spec_from_json(parse_json(read_text(dir / "spec.json"), (dir / "spec.json").string()));
  return Bundle{read_graph(dir / "graph.csv"), std::move(inst), std::move(mask), spec};
}

}  // namespace gsr
