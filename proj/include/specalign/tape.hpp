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

// Matrix-valued reverse-mode differentiation.
//
// Every operation appends a node holding its forward value and a closure that
// pushes the node's adjoint into its parents. Nodes are appended in creation
// order, so walking the node list backwards is a reverse topological order and
// each node's closure runs exactly once per backward pass.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "specalign/linalg.hpp"

namespace specalign {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Matrix& value() const;
  Matrix grad() const;
  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  /// Appends an op node. `backward` is dropped when no parent needs a gradient.
  Var push(Matrix value, std::span<const Var> parents, BackwardFn backward);

  /// Seeds d(root)/d(root) = 1 and runs every closure once, last node first.
  /// `root` must be 1x1.
  void backward(Var root);

  /// Adds `g` into the adjoint of `v` (no-op for constants).
  void accumulate(const Var& v, const Matrix& g);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  /// Adjoint of a node; a zero matrix of the value's shape when unreached.
  Matrix grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  /// Number of closures executed by the most recent backward pass.
  std::size_t last_backward_visits() const noexcept { return visits_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a / s for a 1x1 node s.
Var div_scalar(Var a, Var s);
/// Adds a 1 x cols row to every row of a.
Var add_row(Var a, Var row);
/// Multiplies row i of a by column entry w_i (w is rows x 1).
Var scale_rows(Var a, Var w);
Var exp(Var a);
/// log(max(a, floor)); the gradient is zero where the floor is active.
Var log(Var a, double floor = 1e-12);
/// sqrt with a zero gradient at zero.
Var sqrt(Var a);
Var reciprocal(Var a);
Var pow(Var a, double exponent);
Var tanh(Var a);
/// log(1 + e^a), computed stably.
Var softplus(Var a);
Var softmax_rows(Var a);
/// Elementwise max; ties route the gradient to `a`.
Var maximum(Var a, Var b);
Var row_sum(Var a);
Var sum(Var a);
Var mean(Var a);
/// Euclidean norm of every row (rows x 1), zero gradient for a zero row.
Var row_norm(Var a);
/// Entry (i, index[i]) of every row, as a rows x 1 column.
Var pick(Var a, std::span<const int> index);
/// Forward identity; backward multiplies the adjoint by -lambda.
Var gradient_reversal(Var a, double lambda);
/// Constant copy of the value; blocks gradient flow.
Var detach(Var a);
Var concat_rows(Var a, Var b);

/// Squared Euclidean distances between rows, n x n.
Var pairwise_sq_dist(Var x);
/// Median over i < j of sqrt(d2_ij), 1x1. The selected pair (or the two middle
/// pairs for an even count) is fixed at forward time.
Var median_pairwise_distance(Var d2);
/// Eigenvalues of the symmetrised input, descending, as an n x 1 column. The
/// sort permutation is fixed at forward time; backward is sum_i g_i u_i u_i^T.
Var sym_eigvals(Var m);
/// ||v||_p over all entries, 1x1. Zero gradient at v = 0.
Var lp_norm(Var v, double p);

}  // namespace ad

}  // namespace specalign
