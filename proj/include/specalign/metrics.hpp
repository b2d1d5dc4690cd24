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

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "specalign/linalg.hpp"

namespace specalign {

/// Reported for a class with no evaluation samples.
inline constexpr double kNoSamples = std::numeric_limits<double>::quiet_NaN();

double accuracy(std::span<const int> predictions, std::span<const int> labels);
/// Per-class recall; kNoSamples for classes absent from `labels`.
std::vector<double> per_class_accuracy(std::span<const int> predictions,
                                       std::span<const int> labels, int classes);
/// Mean over classes that have samples.
double macro_accuracy(std::span<const double> per_class);

/// Proxy A-distance 2(1 - 2 eps), clamped to [0, 2]. eps is the holdout error
/// of a logistic probe (200 gradient steps) separating the two feature sets
/// after standardisation, on a per-domain 50/50 split. Each side needs at
/// least 20 rows.
double a_distance(const Matrix& source_features, const Matrix& target_features,
                  std::uint64_t seed);

}  // namespace specalign
