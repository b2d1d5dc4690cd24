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
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "specalign/linalg.hpp"

namespace specalign {

/// p^(1/tau), renormalised. With `literal_negative_exponent` the exponent is
/// -tau instead, which reverses the class ordering; kept only for comparison.
std::vector<double> sharpen(std::span<const double> p, double tau,
                            bool literal_negative_exponent = false);

/// p_c / marginal_c, renormalised. Marginal entries are floored at 1e-6.
std::vector<double> class_balance(std::span<const double> p, std::span<const double> marginal);

struct BankOptions {
  double tau = 0.5;
  double xi = 0.5;
  bool literal_negative_exponent = false;

  friend bool operator==(const BankOptions&, const BankOptions&) = default;
};

/// Index-keyed store of refined target predictions and their features.
///
/// Every stored probability vector is a distribution; `marginal()` is the mean
/// of the stored vectors. Updates and queries are not synchronised.
class MemoryBank {
 public:
  MemoryBank(std::size_t capacity, std::size_t classes, std::size_t feature_dim,
             BankOptions options = {});

  /// Fills every entry from raw model probabilities (capacity x C) and
  /// features (capacity x d): sharpen, then balance by the resulting marginal.
  void initialize(const Matrix& probabilities, const Matrix& features);

  /// Blends a refined prediction into entry `index`:
  ///   p <- xi p_old + (1 - xi) p_new (renormalised),  f <- xi f_old + (1 - xi) f_new.
  /// An empty entry takes the new values as-is.
  void ema_update(std::size_t index, std::span<const double> probability,
                  std::span<const double> feature);

  /// Refines raw model outputs (sharpen + class balance) and EMA-updates each row.
  void update(std::span<const std::size_t> indices, const Matrix& probabilities,
              const Matrix& features);

  /// Indices of the k stored features with the highest cosine similarity to
  /// `feature`, best first; `exclude` (the query's own key) is skipped.
  std::vector<std::size_t> knn_query(std::span<const double> feature, std::size_t k,
                                     std::optional<std::size_t> exclude = std::nullopt) const;

  /// Exact recomputation of the class marginal from the stored entries.
  void recompute_marginal();

  std::span<const double> probability(std::size_t index) const;
  std::span<const double> feature(std::size_t index) const;
  std::span<const double> marginal() const noexcept { return marginal_; }
  bool populated(std::size_t index) const;
  std::size_t populated_count() const noexcept { return populated_count_; }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t classes() const noexcept { return classes_; }
  std::size_t feature_dim() const noexcept { return dim_; }
  const BankOptions& options() const noexcept { return options_; }

  /// One JSON object per populated entry: {"index", "probability", "feature"}.
  void dump_jsonl(std::ostream& out) const;

  friend bool operator==(const MemoryBank&, const MemoryBank&) = default;

 private:
  void check_index(std::size_t index) const;

  std::size_t capacity_;
  std::size_t classes_;
  std::size_t dim_;
  BankOptions options_;
  std::vector<double> probs_;     // capacity x classes
  std::vector<double> features_;  // capacity x dim
  std::vector<double> norms_;
  std::vector<char> populated_;
  std::size_t populated_count_ = 0;
  std::vector<double> marginal_;
};

}  // namespace specalign
