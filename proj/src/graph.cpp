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

#include "specalign/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "specalign/error.hpp"

namespace specalign {

void validate(const FeatureBatch& batch, int classes) {
  if (batch.n() == 0) throw DimensionError("FeatureBatch: empty batch");
  if (!batch.features.all_finite()) throw NumericalError("FeatureBatch: non-finite feature");
  if (batch.labels) {
    if (batch.labels->size() != batch.n()) {
      throw DimensionError("FeatureBatch: label count does not match rows");
    }
    for (int y : *batch.labels) {
      if (y < 0 || y >= classes) {
        throw ParameterError("FeatureBatch: label " + std::to_string(y) + " outside [0, " +
                             std::to_string(classes) + ")");
      }
    }
  }
}

SimilarityKind parse_similarity(const std::string& name) {
  if (name == "cosine") return SimilarityKind::cosine;
  if (name == "gaussian") return SimilarityKind::gaussian;
  if (name == "euclidean") return SimilarityKind::euclidean;
  throw ParameterError("unknown similarity '" + name + "'");
}

LaplacianKind parse_laplacian(const std::string& name) {
  if (name == "sym") return LaplacianKind::sym;
  if (name == "rwk") return LaplacianKind::rwk;
  throw ParameterError("unknown laplacian '" + name + "'");
}

std::string to_string(SimilarityKind kind) {
  switch (kind) {
    case SimilarityKind::cosine: return "cosine";
    case SimilarityKind::gaussian: return "gaussian";
    case SimilarityKind::euclidean: return "euclidean";
  }
  return "?";
}

std::string to_string(LaplacianKind kind) {
  return kind == LaplacianKind::sym ? "sym" : "rwk";
}

namespace {

Matrix squared_distances(const Matrix& f) {
  const std::size_t n = f.rows();
  Matrix d2(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < f.cols(); ++k) {
        const double d = f(i, k) - f(j, k);
        s += d * d;
      }
      d2(i, j) = d2(j, i) = s;
    }
  }
  return d2;
}

double median_distance(const Matrix& d2) {
  std::vector<double> d;
  for (std::size_t i = 0; i < d2.rows(); ++i)
    for (std::size_t j = i + 1; j < d2.cols(); ++j) d.push_back(std::sqrt(d2(i, j)));
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  return m % 2 == 1 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

void require_pairs(std::size_t n) {
  if (n < 2) throw DimensionError("pairwise_similarity: need at least 2 rows");
}

}  // namespace

Matrix pairwise_similarity(const Matrix& f, SimilarityKind kind) {
  const std::size_t n = f.rows();
  require_pairs(n);
  Matrix s(n, n);
  switch (kind) {
    case SimilarityKind::cosine: {
      std::vector<double> norm(n);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (double v : f.row_span(i)) acc += v * v;
        norm[i] = std::sqrt(acc);
        if (norm[i] == 0.0) {
          throw DegenerateInputError("cosine similarity: row " + std::to_string(i) +
                                     " has zero norm");
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          double dot = 0.0;
          for (std::size_t k = 0; k < f.cols(); ++k) dot += f(i, k) * f(j, k);
          s(i, j) = s(j, i) = 0.5 * (1.0 + dot / (norm[i] * norm[j]));
        }
      }
      break;
    }
    case SimilarityKind::gaussian: {
      const Matrix d2 = squared_distances(f);
      double sigma = median_distance(d2);
      if (sigma == 0.0) sigma = 1.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (i != j) s(i, j) = std::exp(-d2(i, j) / (2.0 * sigma * sigma));
      break;
    }
    case SimilarityKind::euclidean: {
      const Matrix d2 = squared_distances(f);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (i != j) s(i, j) = 1.0 / (1.0 + std::sqrt(d2(i, j)));
      break;
    }
  }
  return s;
}

Matrix pairwise_similarity(const FeatureBatch& batch, SimilarityKind kind) {
  return pairwise_similarity(batch.features, kind);
}

Matrix knn_mask(const Matrix& s, std::size_t k) {
  const std::size_t n = s.rows();
  if (!s.is_square()) throw DimensionError("knn_mask: similarity must be square");
  if (k < 1 || k >= n) {
    throw ParameterError("knn_sparsify: k = " + std::to_string(k) + " must lie in [1, " +
                         std::to_string(n) + ")");
  }
  Matrix mask(n, n);
  std::vector<std::size_t> cols;
  cols.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cols.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) cols.push_back(j);
    std::stable_sort(cols.begin(), cols.end(),
                     [&](std::size_t a, std::size_t b) { return s(i, a) > s(i, b); });
    for (std::size_t r = 0; r < k; ++r) mask(i, cols[r]) = 1.0;
  }
  return mask;
}

Matrix knn_sparsify(const Matrix& s, std::size_t k) {
  const Matrix mask = knn_mask(s, k);
  const std::size_t n = s.rows();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) a(i, j) = std::max(mask(i, j) * s(i, j), mask(j, i) * s(j, i));
  return a;
}

DomainGraph make_graph(Matrix adjacency, LaplacianKind kind, std::size_t k) {
  if (!adjacency.is_square()) throw DimensionError("make_graph: adjacency must be square");
  const std::size_t n = adjacency.rows();
  DomainGraph g;
  g.degree.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) {
      throw DegenerateInputError("make_graph: nonzero diagonal at " + std::to_string(i));
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double w = adjacency(i, j);
      if (!std::isfinite(w) || w < 0.0) {
        throw DegenerateInputError("make_graph: negative or non-finite weight");
      }
      if (std::abs(w - adjacency(j, i)) > 1e-12) {
        throw DegenerateInputError("make_graph: adjacency is not symmetric");
      }
      g.degree[i] += w;
    }
    if (g.degree[i] <= 0.0) {
      throw DegenerateInputError("make_graph: vertex " + std::to_string(i) + " is isolated");
    }
  }
  g.adjacency = std::move(adjacency);
  g.laplacian_kind = kind;
  g.k = k;
  return g;
}

DomainGraph build_graph(const Matrix& features, const GraphOptions& options) {
  Matrix s = pairwise_similarity(features, options.similarity);
  const std::size_t k = options.sparsify ? options.k : features.rows() - 1;
  Matrix a = options.sparsify ? knn_sparsify(s, options.k) : std::move(s);
  return make_graph(std::move(a), options.laplacian, k);
}

Matrix normalized_adjacency(const DomainGraph& g) {
  const std::size_t n = g.n();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (g.degree[i] <= 0.0) throw DegenerateInputError("laplacian: zero degree");
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = g.adjacency(i, j) / std::sqrt(g.degree[i] * g.degree[j]);
  return out;
}

Matrix laplacian(const DomainGraph& g) {
  const std::size_t n = g.n();
  if (g.laplacian_kind == LaplacianKind::rwk) {
    Matrix p(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      if (g.degree[i] <= 0.0) throw DegenerateInputError("laplacian: zero degree");
      for (std::size_t j = 0; j < n; ++j) p(i, j) = g.adjacency(i, j) / g.degree[i];
    }
    return p;
  }
  Matrix l = normalized_adjacency(g);
  l *= -1.0;
  for (std::size_t i = 0; i < n; ++i) l(i, i) += 1.0;
  return l;
}

Var spectral_operator(Var features, const GraphOptions& options) {
  Tape& tape = features.tape();
  const std::size_t n = features.rows();
  require_pairs(n);

  Matrix off_diag(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) off_diag(i, i) = 0.0;
  const Var off = tape.constant(off_diag);

  Var sim;
  switch (options.similarity) {
    case SimilarityKind::cosine: {
      const Var norms = ad::row_norm(features);
      for (double v : norms.value().values()) {
        if (v == 0.0) throw DegenerateInputError("cosine similarity: zero-norm row");
      }
      const Var unit = ad::scale_rows(features, ad::reciprocal(norms));
      const Var cos = ad::matmul(unit, ad::transpose(unit));
      sim = ad::mul(ad::add_scalar(ad::scale(cos, 0.5), 0.5), off);
      break;
    }
    case SimilarityKind::gaussian: {
      const Var d2 = ad::pairwise_sq_dist(features);
      Var sigma = ad::median_pairwise_distance(d2);
      if (sigma.scalar() == 0.0) sigma = tape.constant(Matrix(1, 1, 1.0));
      const Var two_sigma_sq = ad::scale(ad::mul(sigma, sigma), 2.0);
      sim = ad::mul(ad::exp(ad::scale(ad::div_scalar(d2, two_sigma_sq), -1.0)), off);
      break;
    }
    case SimilarityKind::euclidean: {
      const Var dist = ad::sqrt(ad::pairwise_sq_dist(features));
      sim = ad::mul(ad::reciprocal(ad::add_scalar(dist, 1.0)), off);
      break;
    }
  }

  Var adj = sim;
  if (options.sparsify) {
    const Var mask = tape.constant(knn_mask(sim.value(), options.k));
    const Var kept = ad::mul(sim, mask);
    adj = ad::maximum(kept, ad::transpose(kept));
  }

  const Var degree = ad::row_sum(adj);
  for (double d : degree.value().values()) {
    if (d <= 0.0) throw DegenerateInputError("laplacian: zero degree");
  }
  const Var inv_sqrt = ad::pow(degree, -0.5);
  const Var norm_adj = ad::scale_rows(ad::transpose(ad::scale_rows(adj, inv_sqrt)), inv_sqrt);
  if (options.laplacian == LaplacianKind::rwk) return norm_adj;
  return ad::sub(tape.constant(Matrix::identity(n)), norm_adj);
}

}  // namespace specalign
