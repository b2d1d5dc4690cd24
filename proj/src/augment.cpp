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

#include "specalign/augment.hpp"

#include <algorithm>
#include <cmath>

#include "specalign/error.hpp"

namespace specalign {

void validate(const AugmentPolicy& policy) {
  if (!(policy.jitter_sigma >= 0.0) || !std::isfinite(policy.jitter_sigma)) {
    throw ParameterError("AugmentPolicy: jitter_sigma must be finite and >= 0");
  }
  if (!(policy.scale_lo <= 1.0 && 1.0 <= policy.scale_hi)) {
    throw ParameterError("AugmentPolicy: scale range must contain 1");
  }
}

Matrix augment(const Matrix& inputs, const AugmentPolicy& policy, Rng& rng) {
  validate(policy);
  Matrix out = inputs;
  if (policy.scale_lo != policy.scale_hi) {
    std::uniform_real_distribution<double> scale(policy.scale_lo, policy.scale_hi);
    for (std::size_t i = 0; i < out.rows(); ++i) {
      const double s = scale(rng);
      for (double& v : out.row_span(i)) v *= s;
    }
  } else if (policy.scale_lo != 1.0) {
    out *= policy.scale_lo;
  }
  if (policy.jitter_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, policy.jitter_sigma);
    for (double& v : out.values()) v += noise(rng);
  }
  return out;
}

FeatureBatch augment(const FeatureBatch& batch, const AugmentPolicy& policy, Rng& rng) {
  FeatureBatch out;
  out.features = augment(batch.features, policy, rng);
  out.labels = batch.labels;
  out.tag = DomainTag::augmented;
  return out;
}

double ramp(double t, double total, double v) {
  if (!(v >= 0.0)) throw ParameterError("ramp: v must be >= 0");
  if (!(total > 0.0)) return v;
  const double frac = std::clamp(t / total, 0.0, 1.0);
  const double gap = 1.0 - frac;
  return v * std::exp(-5.0 * gap * gap);
}

Var consistency_loss(Var probabilities, Var augmented, double weight) {
  if (!probabilities.value().same_shape(augmented.value())) {
    throw DimensionError("consistency_loss: prediction shapes differ");
  }
  return ad::scale(ad::sum(ad::row_norm(ad::sub(probabilities, augmented))), weight);
}

}  // namespace specalign
