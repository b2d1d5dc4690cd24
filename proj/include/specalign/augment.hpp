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

#include "specalign/graph.hpp"
#include "specalign/linalg.hpp"
#include "specalign/random.hpp"
#include "specalign/tape.hpp"

namespace specalign {

/// x' = s x + eta with s ~ U(scale_lo, scale_hi) per sample and
/// eta ~ N(0, jitter_sigma^2) per coordinate.
struct AugmentPolicy {
  double jitter_sigma = 0.05;
  double scale_lo = 0.9;
  double scale_hi = 1.1;

  bool is_identity() const noexcept {
    return jitter_sigma == 0.0 && scale_lo == 1.0 && scale_hi == 1.0;
  }
};

void validate(const AugmentPolicy& policy);

Matrix augment(const Matrix& inputs, const AugmentPolicy& policy, Rng& rng);
FeatureBatch augment(const FeatureBatch& batch, const AugmentPolicy& policy, Rng& rng);

/// v exp(-5 (1 - t/T)^2); t beyond T clamps to v.
double ramp(double t, double total, double v);

/// weight * sum_i ||p_i - p'_i||_2.
Var consistency_loss(Var probabilities, Var augmented_probabilities, double weight);

}  // namespace specalign
