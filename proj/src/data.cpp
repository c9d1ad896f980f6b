#include "gsr/data.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

namespace gsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

Eigen::Index FeatureTable::size() const {
  return distances && features.size() == 0 ? distances->rows() : features.rows();
}

void FeatureTable::validate() const {
  require_finite(features, "FeatureTable");
  if (observed)
    require(observed->rows() == features.rows() && observed->cols() == features.cols(),
            ErrorKind::DimensionMismatch, "observation mask shape differs from the feature matrix");
  if (distances) {
    const Matrix& d = *distances;
    require(d.rows() == d.cols(), ErrorKind::DimensionMismatch, "distance matrix must be square");
    require(features.size() == 0 || d.rows() == features.rows(), ErrorKind::DimensionMismatch,
            "distance matrix size differs from the feature rows");
    require_finite(d, "distance matrix");
    require((d - d.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + d.cwiseAbs().maxCoeff()),
            ErrorKind::InvalidArgument, "distance matrix is not symmetric");
    require(d.diagonal().isZero(0.0), ErrorKind::InvalidArgument, "distance matrix has a nonzero diagonal");
    require(d.minCoeff() >= 0.0, ErrorKind::InvalidArgument, "negative distance");
  }
}

void GraphBuildSpec::validate(Eigen::Index n) const {
  require(k >= 1, ErrorKind::InvalidArgument, "k must be positive");
  require(k < n, ErrorKind::KTooLarge,
          "k = " + std::to_string(k) + " needs more than " + std::to_string(k) + " nodes, got " + std::to_string(n));
}

Matrix pairwise_distances(const FeatureTable& table, const GraphBuildSpec& spec) {
  table.validate();
  if (spec.metric == DistanceMetric::Precomputed) {
    require(table.distances.has_value(), ErrorKind::InvalidArgument, "precomputed metric without a distance matrix");
    return *table.distances;
  }
  const Matrix& f = table.features;
  const Eigen::Index n = f.rows();
  const Eigen::Index d = f.cols();
  Matrix out = Matrix::Zero(n, n);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> disjoint;
  double valid_sum = 0.0;
  long valid_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double acc = 0.0;
      bool shared = false;
      for (Eigen::Index c = 0; c < d; ++c) {
        if (table.observed && !(table.observed->accessible(i, c) && table.observed->accessible(j, c))) continue;
        shared = true;
        const double diff = f(i, c) - f(j, c);
        acc += spec.metric == DistanceMetric::L1 ? std::abs(diff) : diff * diff;
      }
      if (!shared) {
        disjoint.emplace_back(i, j);
        continue;
      }
      const double dist = spec.metric == DistanceMetric::L1 ? acc : std::sqrt(acc);
      out(i, j) = out(j, i) = dist;
      valid_sum += dist;
      ++valid_count;
    }
  }
  if (!disjoint.empty()) {
    double fill = kInf;
    if (spec.missing == MissingPolicy::MeanDistance) {
      require(valid_count > 0, ErrorKind::DegenerateDistances, "no pair of rows shares an observed feature");
      fill = valid_sum / static_cast<double>(valid_count);
    }
    for (const auto& [i, j] : disjoint) out(i, j) = out(j, i) = fill;
  }
  return out;
}

Matrix kernel_weights(const Matrix& distances) {
  const Eigen::Index n = distances.rows();
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != j && std::isfinite(distances(i, j))) total += distances(i, j);
  require(total > 0.0, ErrorKind::DegenerateDistances, "all pairwise distances are zero");
  const double scale = static_cast<double>(n) * static_cast<double>(n) / total;
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != j && std::isfinite(distances(i, j)))
        // Far pairs underflow; keep them strictly positive.
        p(i, j) = std::max(std::exp(-scale * distances(i, j)), DBL_MIN);
  return p;
}

Matrix knn_weights(const Matrix& distances, int k) {
  const Eigen::Index n = distances.rows();
  const Matrix p = kernel_weights(distances);
  Matrix w = Matrix::Zero(n, n);
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    order.clear();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i && std::isfinite(distances(i, j))) order.push_back(j);
    require(static_cast<Eigen::Index>(order.size()) >= k, ErrorKind::DegenerateDistances,
            "node " + std::to_string(i) + " has fewer than k comparable neighbors");
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return distances(i, a) < distances(i, b); });
    for (int r = 0; r < k; ++r) w(i, order[r]) = p(i, order[r]);
  }
  return w;
}

GraphShift build_knn_graph(const FeatureTable& table, const GraphBuildSpec& spec) {
  const Eigen::Index n = table.size();
  spec.validate(n);
  const Matrix dist = pairwise_distances(table, spec);
  Matrix w = knn_weights(dist, spec.k);
  if (spec.symmetrize) w = w.cwiseMax(w.transpose()).eval();
  if (spec.normalization == ShiftNormalization::Row) {
    for (Eigen::Index i = 0; i < n; ++i) w.row(i) /= w.row(i).sum();
  } else {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double s = w.col(j).sum();
      if (s > 0.0) w.col(j) /= s;
    }
  }
  return normalize_shift(GraphShift(std::move(w)));
}

// ---------------------------------------------------------------------------

void SyntheticSpec::validate() const {
  require(n >= 1 && l >= 1, ErrorKind::Config, "synthetic dimensions must be positive");
  require(components >= 0 && components <= n, ErrorKind::Config, "components must lie in [0, N]");
  require(diffusion_steps >= 0, ErrorKind::Config, "diffusion_steps must be nonnegative");
  require(rank >= 0, ErrorKind::Config, "rank must be nonnegative");
  require(std::isfinite(noise) && noise >= 0.0, ErrorKind::Config, "noise must be nonnegative");
  require(outliers >= 0 && outliers <= n, ErrorKind::Config, "outliers must lie in [0, N]");
  require(std::isfinite(outlier_min) && std::isfinite(outlier_max) && outlier_min >= 0.0 &&
              outlier_min <= outlier_max,
          ErrorKind::Config, "outlier magnitudes must satisfy 0 <= min <= max");
  require(graph_k >= 1, ErrorKind::Config, "graph_k must be positive");
  require(ratio > 0.0 && ratio <= 1.0, ErrorKind::Config, "ratio must lie in (0, 1]");
}

GraphShift synth_graph(const SyntheticSpec& spec) {
  spec.validate();
  require(spec.n >= 2, ErrorKind::Config, "a synthetic graph needs at least two nodes");
  Rng rng = Rng::stream(spec.seed, "synth/graph");
  FeatureTable table;
  table.features.resize(spec.n, 2);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    table.features(i, 0) = rng.uniform();
    table.features(i, 1) = rng.uniform();
  }
  GraphBuildSpec build;
  build.k = static_cast<int>(std::min<Eigen::Index>(spec.graph_k, spec.n - 1));
  return build_knn_graph(table, build);
}

namespace {

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

Matrix smooth_columns(const SyntheticSpec& spec, const GraphShift& shift, Eigen::Index cols, Rng& rng) {
  const Eigen::Index n = spec.n;
  if (spec.recipe == SmoothRecipe::Diffusion) {
    Matrix x = gaussian(rng, n, cols);
    const Matrix lazy = 0.5 * (Matrix::Identity(n, n) + shift.weights());
    for (int s = 0; s < spec.diffusion_steps; ++s) x = lazy * x;
    return x;
  }
  const Eigen::Index r = spec.components > 0 ? spec.components : std::max<Eigen::Index>(2, n / 10);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(tilde_shift(shift));
  const Matrix basis = eig.eigenvectors().leftCols(std::min(r, n));
  const double scale = std::sqrt(static_cast<double>(n) / static_cast<double>(basis.cols()));
  return scale * basis * gaussian(rng, basis.cols(), cols);
}

}  // namespace

SignalMatrix smooth_signals(const SyntheticSpec& spec, const GraphShift& shift) {
  spec.validate();
  require_normalized(shift, "smooth_signals");
  require(shift.size() == spec.n, ErrorKind::DimensionMismatch, "graph size differs from the synthetic spec");
  Rng rng = Rng::stream(spec.seed, "synth/x0");
  if (spec.rank > 0) {
    const Matrix b = smooth_columns(spec, shift, spec.rank, rng);
    const Matrix c = gaussian(rng, spec.rank, spec.l) / std::sqrt(static_cast<double>(spec.rank));
    return b * c;
  }
  return smooth_columns(spec, shift, spec.l, rng);
}

SyntheticInstance synth_instance(const SyntheticSpec& spec, const GraphShift& shift) {
  SyntheticInstance out;
  out.x0 = smooth_signals(spec, shift);
  const Eigen::Index n = spec.n, l = spec.l;

  out.w = Matrix::Zero(n, l);
  if (spec.noise > 0.0) {
    Rng rng = Rng::stream(spec.seed, "synth/noise");
    out.w = spec.noise * gaussian(rng, n, l);
  }

  out.e = Matrix::Zero(n, l);
  if (spec.outliers > 0) {
    Rng rng = Rng::stream(spec.seed, "synth/outliers");
    for (Eigen::Index c = 0; c < l; ++c) {
      const double unit = spec.relative_outliers ? out.x0.col(c).maxCoeff() - out.x0.col(c).minCoeff() : 1.0;
      for (std::size_t pos : rng.sample(static_cast<std::size_t>(n), static_cast<std::size_t>(spec.outliers))) {
        const double magnitude = rng.uniform(spec.outlier_min, spec.outlier_max) * unit;
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        // Keep exactly `outliers` nonzeros even for a zero draw.
        out.e(static_cast<Eigen::Index>(pos), c) = sign * std::max(magnitude, DBL_MIN);
      }
    }
  }
  out.t = out.x0 + out.w + out.e;
  return out;
}

GraphShift random_shift(Rng& rng, Eigen::Index n, double density, bool symmetric) {
  require(n >= 2, ErrorKind::InvalidArgument, "random_shift needs at least two nodes");
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = (i + 1) % n;
    const double ring = 0.5 + rng.uniform();
    a(i, j) = ring;
    if (symmetric) a(j, i) = ring;
    for (Eigen::Index k = symmetric ? i + 1 : 0; k < n; ++k) {
      if (k == i) continue;
      if (rng.uniform() < density) {
        const double v = rng.uniform();
        a(i, k) = v;
        if (symmetric) a(k, i) = v;
      }
    }
  }
  return normalize_shift(GraphShift(a));
}

// ---------------------------------------------------------------------------

IndexMask sample_mask(Eigen::Index n, Eigen::Index l, double ratio, std::uint64_t seed) {
  require(ratio > 0.0 && ratio <= 1.0, ErrorKind::InvalidArgument, "labeling ratio must lie in (0, 1]");
  const auto total = static_cast<std::size_t>(n * l);
  const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
  require(count > 0, ErrorKind::EmptyMask, "labeling ratio selects no entry");
  Rng rng = Rng::stream(seed, "mask");
  IndexMask mask(n, l);
  for (std::size_t k : rng.sample(total, count)) {
    const auto idx = static_cast<Eigen::Index>(k);
    mask.set(idx % n, idx / n, true);
  }
  return mask;
}

Corruption corrupt_labels(const SignalMatrix& t, const IndexMask& mask, double fraction, std::uint64_t seed,
                          CorruptionKind kind) {
  require(fraction >= 0.0 && fraction < 1.0, ErrorKind::InvalidArgument, "corruption fraction must lie in [0, 1)");
  require(mask.rows() == t.rows() && mask.cols() == t.cols(), ErrorKind::DimensionMismatch,
          "corrupt_labels: mask shape differs from the signal");
  const auto entries = mask.entries();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(entries.size())));
  Corruption out{t, {}};
  if (count == 0) return out;
  Rng rng = Rng::stream(seed, "corrupt");
  const double mean = t.mean();
  const double sd = std::sqrt((t.array() - mean).square().mean());
  const double shift = 5.0 * (sd > 0.0 ? sd : 1.0);
  for (std::size_t k : rng.sample(entries.size(), count)) {
    const auto [r, c] = entries[k];
    if (kind == CorruptionKind::FlipSign) {
      out.t(r, c) = -t(r, c);
    } else {
      out.t(r, c) += rng.uniform() < 0.5 ? -shift : shift;
    }
    out.altered.emplace_back(r, c);
  }
  return out;
}

}  // namespace gsr
