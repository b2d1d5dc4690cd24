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

#include <span>
#include <vector>

#include "specalign/graph.hpp"
#include "specalign/linalg.hpp"
#include "specalign/tape.hpp"

namespace specalign {

/// Descending Laplacian eigenvalues of one graph.
struct Spectrum {
  std::vector<double> values;
  LaplacianKind kind = LaplacianKind::sym;
};

/// Spectrum of a matrix produced by `laplacian()`. For rwk the transition
/// matrix P = D^{-1} A is first mapped to its symmetric similar matrix
/// sqrt(P .* P^T) = D^{-1/2} A D^{-1/2}.
Spectrum spectrum(const Matrix& laplacian_matrix, LaplacianKind kind);
Spectrum spectrum(const DomainGraph& graph);

/// ||a - b||_p.
double spectral_distance(const Spectrum& a, const Spectrum& b, double p = 2.0);
double spectral_distance(std::span<const double> a, std::span<const double> b, double p = 2.0);

/// Alignment loss between two graphs given as values.
double gsa_loss(const DomainGraph& source, const DomainGraph& target, double p = 2.0);

struct AlignmentOptions {
  GraphOptions graph;
  double p = 2.0;
  /// Stops the gradient into the source features.
  bool detach_source = true;
};

/// d(G_s, G_t) built from feature nodes; differentiable in the features.
Var gsa_loss(Var source_features, Var target_features, const AlignmentOptions& options);

/// d(G_s, G_t) + d(G_s, G_a). The source graph is built once and shared.
Var gsa_plus_loss(Var source_features, Var target_features, Var augmented_features,
                  const AlignmentOptions& options);

}  // namespace specalign
