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

#include "specalign/spectral.hpp"

#include <cmath>
#include <string>

#include "specalign/error.hpp"

namespace specalign {

Spectrum spectrum(const Matrix& l, LaplacianKind kind) {
  if (!l.is_square()) throw DimensionError("spectrum: non-square operator");
  Spectrum out;
  out.kind = kind;
  if (kind == LaplacianKind::sym) {
    out.values = sym_eig(l).values;
    return out;
  }
  const std::size_t n = l.rows();
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = std::sqrt(std::max(0.0, l(i, j) * l(j, i)));
  out.values = sym_eig(s).values;
  return out;
}

Spectrum spectrum(const DomainGraph& graph) {
  return spectrum(laplacian(graph), graph.laplacian_kind);
}

double spectral_distance(std::span<const double> a, std::span<const double> b, double p) {
  if (a.size() != b.size()) {
    throw DimensionError("spectral_distance: spectra of length " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  }
  if (!(p >= 1.0)) throw ParameterError("spectral_distance: p must be >= 1");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    acc += p == 1.0 ? d : std::pow(d, p);
  }
  return p == 1.0 ? acc : std::pow(acc, 1.0 / p);
}

double spectral_distance(const Spectrum& a, const Spectrum& b, double p) {
  return spectral_distance(a.values, b.values, p);
}

double gsa_loss(const DomainGraph& source, const DomainGraph& target, double p) {
  if (source.n() != target.n()) {
    throw DimensionError("gsa_loss: graphs on " + std::to_string(source.n()) + " and " +
                         std::to_string(target.n()) + " vertices");
  }
  if (source.laplacian_kind != target.laplacian_kind) {
    throw ParameterError("gsa_loss: graphs use different Laplacian kinds");
  }
  return spectral_distance(spectrum(source), spectrum(target), p);
}

namespace {

Var graph_spectrum(Var features, const GraphOptions& options) {
  return ad::sym_eigvals(spectral_operator(features, options));
}

void require_same_n(Var a, Var b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("gsa_loss: batches of " + std::to_string(a.rows()) + " and " +
                         std::to_string(b.rows()) + " rows");
  }
}

}  // namespace

Var gsa_loss(Var source_features, Var target_features, const AlignmentOptions& options) {
  require_same_n(source_features, target_features);
  const Var src = options.detach_source ? ad::detach(source_features) : source_features;
  const Var ls = graph_spectrum(src, options.graph);
  const Var lt = graph_spectrum(target_features, options.graph);
  return ad::lp_norm(ad::sub(ls, lt), options.p);
}

Var gsa_plus_loss(Var source_features, Var target_features, Var augmented_features,
                  const AlignmentOptions& options) {
  require_same_n(source_features, target_features);
  require_same_n(source_features, augmented_features);
  const Var src = options.detach_source ? ad::detach(source_features) : source_features;
  const Var ls = graph_spectrum(src, options.graph);
  const Var lt = graph_spectrum(target_features, options.graph);
  const Var la = graph_spectrum(augmented_features, options.graph);
  return ad::add(ad::lp_norm(ad::sub(ls, lt), options.p),
                 ad::lp_norm(ad::sub(ls, la), options.p));
}

}  // namespace specalign
