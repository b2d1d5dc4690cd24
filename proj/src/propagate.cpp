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

#include "specalign/propagate.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "specalign/error.hpp"

namespace specalign {

namespace {

constexpr double kLogFloor = 1e-12;

void require_prop_shape(const Matrix& p, const PropagationResult& prop) {
  if (p.rows() != prop.q.rows() || p.cols() != prop.q.cols() ||
      prop.pseudo_labels.size() != p.rows()) {
    throw DimensionError("nap_loss: probabilities and propagation result disagree in shape");
  }
}

Matrix column_of(std::span<const double> values) { return Matrix::column(values); }

}  // namespace

std::vector<int> row_argmax(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row_span(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

PropagationResult neighbor_average(const MemoryBank& bank, const Matrix& features,
                                   const Matrix& probabilities, std::size_t k,
                                   std::span<const std::size_t> self_indices) {
  const std::size_t n = features.rows();
  if (probabilities.rows() != n || probabilities.cols() != bank.classes()) {
    throw DimensionError("neighbor_average: probabilities must be n x C");
  }
  if (!self_indices.empty() && self_indices.size() != n) {
    throw DimensionError("neighbor_average: one self index per row required");
  }
  PropagationResult out;
  out.q = Matrix(n, bank.classes());
  out.pseudo_labels = row_argmax(probabilities);
  out.confidence.resize(n);
  const double inv_k = 1.0 / static_cast<double>(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<std::size_t> self;
    if (!self_indices.empty()) self = self_indices[i];
    for (std::size_t j : bank.knn_query(features.row_span(i), k, self)) {
      const auto pj = bank.probability(j);
      for (std::size_t c = 0; c < bank.classes(); ++c) out.q(i, c) += pj[c] * inv_k;
    }
    out.confidence[i] = out.q(i, static_cast<std::size_t>(out.pseudo_labels[i]));
  }
  return out;
}

Var nap_loss(Var probabilities, const PropagationResult& prop) {
  require_prop_shape(probabilities.value(), prop);
  Tape& tape = probabilities.tape();
  const Var logp = ad::log(ad::pick(probabilities, prop.pseudo_labels), kLogFloor);
  const Var weighted = ad::mul(logp, tape.constant(column_of(prop.confidence)));
  return ad::scale(ad::sum(weighted), -1.0 / static_cast<double>(prop.q.rows()));
}

double nap_loss(const Matrix& p, const PropagationResult& prop) {
  require_prop_shape(p, prop);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const double pi = p(i, static_cast<std::size_t>(prop.pseudo_labels[i]));
    acc += prop.confidence[i] * std::log(std::max(pi, kLogFloor));
  }
  return -acc / static_cast<double>(p.rows());
}

Var nap_plus_loss(Var probabilities, Var augmented, const PropagationResult& prop,
                  double threshold, bool average) {
  require_prop_shape(probabilities.value(), prop);
  require_prop_shape(augmented.value(), prop);
  if (!(threshold >= 0.0)) throw ParameterError("nap_plus_loss: threshold must be >= 0");
  const Matrix& p = probabilities.value();
  std::vector<double> weight(p.rows(), 0.0);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto row = p.row_span(i);
    if (*std::max_element(row.begin(), row.end()) >= threshold) weight[i] = prop.confidence[i];
  }
  Tape& tape = augmented.tape();
  const Var logp = ad::log(ad::pick(augmented, prop.pseudo_labels), kLogFloor);
  const Var total = ad::sum(ad::mul(logp, tape.constant(column_of(weight))));
  return ad::scale(total, average ? -1.0 / static_cast<double>(p.rows()) : -1.0);
}

Matrix lpa_closed_form(const Matrix& adjacency, const Matrix& seeds, double pi) {
  if (!(pi >= 0.0 && pi < 1.0)) throw ParameterError("lpa_closed_form: pi must lie in [0, 1)");
  if (!adjacency.is_square() || seeds.rows() != adjacency.rows()) {
    throw DimensionError("lpa_closed_form: adjacency n x n and seeds n x C required");
  }
  const std::size_t n = adjacency.rows();
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) deg[i] += adjacency(i, j);
    if (deg[i] <= 0.0) throw DegenerateInputError("lpa_closed_form: zero-degree vertex");
  }
  Matrix system = Matrix::identity(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      system(i, j) -= pi * adjacency(i, j) / std::sqrt(deg[i] * deg[j]);
  try {
    return solve(system, seeds);
  } catch (const SingularityError& e) {
    throw NumericalError(std::string("lpa_closed_form: ") + e.what());
  }
}

SmoothingGap smoothing_gap(const Matrix& adjacency, const Matrix& features, const Matrix& map,
                           std::size_t node) {
  const std::size_t n = adjacency.rows();
  if (!adjacency.is_square() || features.rows() != n) {
    throw DimensionError("smoothing_gap: adjacency n x n and features n x d required");
  }
  if (map.cols() != features.cols()) {
    throw DimensionError("smoothing_gap: map must have d columns");
  }
  if (node >= n) throw KeyError("smoothing_gap: node out of range");
  double deg = 0.0;
  for (std::size_t j = 0; j < n; ++j) deg += adjacency(node, j);
  if (deg <= 0.0) throw DegenerateInputError("smoothing_gap: zero-degree vertex");

  const std::size_t d = features.cols();
  std::vector<double> residual(d);
  for (std::size_t k = 0; k < d; ++k) {
    double avg = 0.0;
    for (std::size_t j = 0; j < n; ++j) avg += adjacency(node, j) * features(j, k);
    residual[k] = features(node, k) - avg / deg;
  }

  const Matrix labels = matmul_nt(features, map);  // n x m, row j = M x_j
  double lhs_sq = 0.0;
  for (std::size_t c = 0; c < labels.cols(); ++c) {
    double avg = 0.0;
    for (std::size_t j = 0; j < n; ++j) avg += adjacency(node, j) * labels(j, c);
    const double gap = labels(node, c) - avg / deg;
    lhs_sq += gap * gap;
  }
  double res_sq = 0.0;
  for (double r : residual) res_sq += r * r;

  SmoothingGap out;
  out.lhs = std::sqrt(lhs_sq);
  out.bound = spectral_norm(map) * std::sqrt(res_sq);
  return out;
}

}  // namespace specalign
