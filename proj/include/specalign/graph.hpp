// Copyright 2026 The specalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Per-batch similarity graphs over feature vectors.
//
// A batch of n features becomes a weighted undirected graph: pairwise
// similarities, each row's k strongest neighbours kept, the kept set made
// symmetric with an elementwise max. The resulting adjacency feeds either the
// symmetric normalised Laplacian I - D^{-1/2} A D^{-1/2} or the random-walk
// transition matrix D^{-1} A.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "specalign/linalg.hpp"
#include "specalign/tape.hpp"

namespace specalign {

enum class DomainTag { source, target, augmented };

struct FeatureBatch {
  Matrix features;  // n x d
  std::optional<std::vector<int>> labels;
  DomainTag tag = DomainTag::source;

  std::size_t n() const noexcept { return features.rows(); }
  std::size_t d() const noexcept { return features.cols(); }
};

/// Throws when the batch is empty, non-finite, or carries labels outside [0, classes).
void validate(const FeatureBatch& batch, int classes);

enum class SimilarityKind { cosine, gaussian, euclidean };
enum class LaplacianKind { rwk, sym };

SimilarityKind parse_similarity(const std::string& name);
LaplacianKind parse_laplacian(const std::string& name);
std::string to_string(SimilarityKind kind);
std::string to_string(LaplacianKind kind);

struct GraphOptions {
  SimilarityKind similarity = SimilarityKind::gaussian;
  LaplacianKind laplacian = LaplacianKind::sym;
  std::size_t k = 5;
  /// false keeps the dense similarity graph.
  bool sparsify = true;
};

struct DomainGraph {
  Matrix adjacency;
  std::vector<double> degree;
  LaplacianKind laplacian_kind = LaplacianKind::sym;
  std::size_t k = 0;

  std::size_t n() const noexcept { return adjacency.rows(); }
};

/// Similarity matrix with a zero diagonal.
///   cosine:    (1 + cos) / 2
///   gaussian:  exp(-|fi - fj|^2 / (2 sigma^2)), sigma = median pairwise distance
///   euclidean: 1 / (1 + |fi - fj|)
/// When every pair coincides the median is zero and sigma falls back to 1.
Matrix pairwise_similarity(const Matrix& features, SimilarityKind kind);
Matrix pairwise_similarity(const FeatureBatch& batch, SimilarityKind kind);

/// Row-wise top-k indicator of off-diagonal entries, before symmetrisation.
/// Ties prefer the smaller column index.
Matrix knn_mask(const Matrix& similarity, std::size_t k);

/// Keeps each row's k largest off-diagonal entries, then max(A, A^T).
Matrix knn_sparsify(const Matrix& similarity, std::size_t k);

/// Wraps an adjacency after checking symmetry, zero diagonal, nonnegative
/// weights and the absence of isolated vertices.
DomainGraph make_graph(Matrix adjacency, LaplacianKind kind, std::size_t k);

DomainGraph build_graph(const Matrix& features, const GraphOptions& options);

/// sym: I - D^{-1/2} A D^{-1/2};  rwk: D^{-1} A.
Matrix laplacian(const DomainGraph& graph);

/// D^{-1/2} A D^{-1/2}.
Matrix normalized_adjacency(const DomainGraph& graph);

/// Differentiable graph construction. Returns the symmetric operator whose
/// eigenvalues form the graph's spectrum: the sym Laplacian, or for rwk the
/// normalised adjacency (similar to D^{-1} A). The k-NN mask is a constant.
Var spectral_operator(Var features, const GraphOptions& options);

}  // namespace specalign
