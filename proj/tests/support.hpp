#pragma once

// Test-only generators and brute-force helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "gsr/graph.hpp"

namespace gsr::test {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

/// Directed random graph where every node has `degree` distinct in-neighbors,
/// equal weights, rows summing to one; normalized.
inline GraphShift random_regular_shift(std::mt19937_64& rng, Eigen::Index n, int degree) {
  Matrix a = Matrix::Zero(n, n);
  std::vector<Eigen::Index> others;
  for (Eigen::Index i = 0; i < n; ++i) {
    others.clear();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    std::shuffle(others.begin(), others.end(), rng);
    for (int k = 0; k < degree; ++k) a(i, others[k]) = 1.0 / degree;
  }
  return normalize_shift(GraphShift(a));
}

/// Random weighted directed graph, normalized by spectral radius.
inline GraphShift random_weighted_shift(std::mt19937_64& rng, Eigen::Index n, double density = 0.3) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, (i + 1) % n) = 0.5 + unit(rng);  // keeps the graph strongly connected
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i && unit(rng) < density) a(i, j) = unit(rng);
  }
  return normalize_shift(GraphShift(a));
}

/// Random symmetric weighted graph, normalized.
inline GraphShift random_symmetric_shift(std::mt19937_64& rng, Eigen::Index n, double density = 0.3) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = (i + 1) % n;
    a(i, j) = a(j, i) = 0.5 + unit(rng);
    for (Eigen::Index k = i + 1; k < n; ++k)
      if (unit(rng) < density) a(i, k) = a(k, i) = unit(rng);
  }
  return normalize_shift(GraphShift(a));
}

/// Random node mask with `count` accessible nodes.
inline IndexMask random_node_mask(std::mt19937_64& rng, Eigen::Index n, Eigen::Index count) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(count));
  return IndexMask::from_nodes(n, idx);
}

inline IndexMask random_entry_mask(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double ratio) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  IndexMask mask(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask.set(i, j, unit(rng) < ratio);
  return mask;
}

/// Smooth signal: combination of the eigenvectors of A~ with the r smallest
/// eigenvalues.
inline Matrix smooth_basis(const GraphShift& shift, Eigen::Index r) {
  const Matrix d = Matrix::Identity(shift.size(), shift.size()) - shift.weights();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(d.transpose() * d);
  return eig.eigenvectors().leftCols(r);
}

inline double relative_error(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace gsr::test
