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

#include <cstddef>
#include <span>
#include <vector>

#include "specalign/bank.hpp"
#include "specalign/linalg.hpp"
#include "specalign/tape.hpp"

namespace specalign {

struct PropagationResult {
  Matrix q;                         // n x C neighbour-averaged bank predictions
  std::vector<int> pseudo_labels;   // argmax of the model's own prediction
  std::vector<double> confidence;   // q(i, pseudo_label_i)
};

/// For each row of `features`, averages the bank predictions of its k cosine
/// nearest neighbours. `self_indices`, when non-empty, gives each row's own
/// bank key so it is excluded from its neighbourhood. Pseudo-labels come
/// from `probabilities` (the model output), not from q.
PropagationResult neighbor_average(const MemoryBank& bank, const Matrix& features,
                                   const Matrix& probabilities, std::size_t k,
                                   std::span<const std::size_t> self_indices = {});

/// -(1/n) sum_i q(i, y_i) log p(i, y_i); q and y are constants.
Var nap_loss(Var probabilities, const PropagationResult& prop);
double nap_loss(const Matrix& probabilities, const PropagationResult& prop);

/// -sum_i 1{max p_i >= c} q(i, y_i) log p'(i, y_i), with y_i from the clean
/// prediction. `average` divides by n.
Var nap_plus_loss(Var probabilities, Var augmented_probabilities, const PropagationResult& prop,
                  double threshold, bool average = false);

/// Z = (I - pi D^{-1/2} A D^{-1/2})^{-1} Y for pi in [0, 1).
Matrix lpa_closed_form(const Matrix& adjacency, const Matrix& seeds, double pi);

/// Row argmax.
std::vector<int> row_argmax(const Matrix& m);

struct SmoothingGap {
  double lhs = 0.0;    // |y_i - (1/D_ii) sum_j A_ij y_j|
  double bound = 0.0;  // ||M||_2 * ||x_i - (1/D_ii) sum_j A_ij x_j||
};

/// Both sides of the label-smoothing inequality at node i for labels y = M x,
/// with `map` an m x d matrix and `features` n x d.
SmoothingGap smoothing_gap(const Matrix& adjacency, const Matrix& features, const Matrix& map,
                           std::size_t node);

}  // namespace specalign
