#pragma once

// Graph construction from features, synthetic instances, masks and label
// corruption. Every generator is a pure function of its spec and seed.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gsr/graph.hpp"
#include "gsr/random.hpp"

namespace gsr {

enum class DistanceMetric { L2, L1, Precomputed };
enum class ShiftNormalization { Row, Column };
/// How to score pairs of rows that share no observed feature.
enum class MissingPolicy { MeanDistance, PairExclusion };

struct FeatureTable {
  Matrix features;                 // N x d
  std::optional<IndexMask> observed;  // N x d; absent means fully observed
  std::optional<Matrix> distances;    // N x N, used with DistanceMetric::Precomputed

  Eigen::Index size() const;
  void validate() const;
};

struct GraphBuildSpec {
  int k = 8;
  DistanceMetric metric = DistanceMetric::L2;
  ShiftNormalization normalization = ShiftNormalization::Row;
  bool symmetrize = false;
  MissingPolicy missing = MissingPolicy::MeanDistance;

  void validate(Eigen::Index n) const;
};

/// Pairwise distances under the spec's metric. Excluded pairs are +inf.
Matrix pairwise_distances(const FeatureTable& table, const GraphBuildSpec& spec);

/// Kernel weights exp(-N^2 d / sum d) over all pairs, before pruning.
Matrix kernel_weights(const Matrix& distances);

/// k nearest neighbors per row (ties to the lower index), kernel weighted.
/// Row n holds the edges into node n. Not normalized.
Matrix knn_weights(const Matrix& distances, int k);

/// Full pipeline: distances, kernel, k-NN pruning, optional symmetrization,
/// row or column normalization, then normalize_shift.
GraphShift build_knn_graph(const FeatureTable& table, const GraphBuildSpec& spec);

// ---------------------------------------------------------------------------

enum class SmoothRecipe { LowFrequency, Diffusion };

struct SyntheticSpec {
  Eigen::Index n = 100;
  Eigen::Index l = 1;
  SmoothRecipe recipe = SmoothRecipe::LowFrequency;
  int components = 0;  // smoothest directions per column; 0 means max(2, N/10)
  int diffusion_steps = 50;
  int rank = 0;        // > 0: X0 = B C with B (N x rank) smooth, C Gaussian
  double noise = 0.0;  // standard deviation of W
  int outliers = 0;    // nonzeros of E per column
  double outlier_min = 0.0;
  double outlier_max = 0.0;
  bool relative_outliers = true;  // magnitudes are multiples of the column range of X0
  int graph_k = 8;                // for synth_graph
  double ratio = 1.0;             // accessible fraction of the bundle mask
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticInstance {
  SignalMatrix x0;
  SignalMatrix w;
  SignalMatrix e;
  SignalMatrix t;
};

/// Random geometric k-NN graph on points in the unit square.
GraphShift synth_graph(const SyntheticSpec& spec);

/// Smooth part X0 only.
SignalMatrix smooth_signals(const SyntheticSpec& spec, const GraphShift& shift);

SyntheticInstance synth_instance(const SyntheticSpec& spec, const GraphShift& shift);

/// Random weighted directed graph (a ring plus random extra edges), or an
/// undirected one when `symmetric`; normalized.
GraphShift random_shift(Rng& rng, Eigen::Index n, double density, bool symmetric);

// ---------------------------------------------------------------------------

/// round(ratio N L) entries chosen uniformly without replacement.
IndexMask sample_mask(Eigen::Index n, Eigen::Index l, double ratio, std::uint64_t seed);

enum class CorruptionKind { FlipSign, Perturb };

struct Corruption {
  SignalMatrix t;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> altered;
};

/// Alters round(fraction |M|) accessible entries: sign flips for labels, or
/// a shift by +-5 standard deviations of t for real-valued data.
Corruption corrupt_labels(const SignalMatrix& t, const IndexMask& mask, double fraction, std::uint64_t seed,
                          CorruptionKind kind = CorruptionKind::FlipSign);

}  // namespace gsr
