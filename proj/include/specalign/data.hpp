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

// Synthetic domain-shift datasets, CSV ingestion and scenario composition.
//
// Every generator is a pure function of its arguments and seed.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "specalign/linalg.hpp"

namespace specalign {

enum class Split { train, test };

/// Label used for samples whose label is withheld.
inline constexpr int kHiddenLabel = -1;

struct Dataset {
  Matrix features;           // n x d
  std::vector<int> labels;   // in [0, classes) or kHiddenLabel
  std::vector<int> domains;  // one domain id per sample
  int classes = 0;
  Split split = Split::train;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Throws unless shapes agree and every visible label lies in [0, classes).
void validate(const Dataset& data);

/// Rows `indices` of `data`, in the given order.
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);
/// Row-wise concatenation; class counts must agree.
Dataset concat(const std::vector<Dataset>& parts);
/// Per-class sample counts.
std::vector<std::size_t> class_counts(const Dataset& data);

/// The standard two interleaved half circles (x in [-1, 2], y in [-0.5, 1]),
/// rotated counter-clockwise about the origin by `rotation_degrees`. Samples
/// alternate between the classes; `n` must be even.
Dataset make_two_moons(std::size_t n, double rotation_degrees, double noise, std::uint64_t seed,
                       int domain = 0);

/// Noise-free class means of the rotated moons.
std::array<std::array<double, 2>, 2> moon_class_means(double rotation_degrees);

/// C isotropic clusters in len(shift) dimensions. Source centres are evenly
/// spaced on a circle of radius 3 (first two coordinates); target centres are
/// source centres + shift. Source has domain id 0, target 1.
std::pair<Dataset, Dataset> make_blob_shift(std::size_t n, int classes,
                                            std::span<const double> shift, double spread,
                                            std::uint64_t seed);

/// Geometric class decay: class c keeps round(head * ratio^(-c / (C-1))) samples,
/// head being the size of class 0. Samples are chosen by seeded shuffle.
Dataset long_tail_resample(const Dataset& data, double imbalance_ratio, std::uint64_t seed);

enum class ScenarioKind { uda, ssda, msda, mtda };

ScenarioKind parse_scenario(const std::string& name);
std::string to_string(ScenarioKind kind);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::uda;
  int labeled_target_shots = 0;
  std::vector<std::size_t> source_domains{0};  // indices into the dataset list
  std::vector<std::size_t> target_domains{1};
  double imbalance_ratio = 1.0;
  bool subpopulation_balance = false;
  std::uint64_t seed = 0;
};

void validate(const ScenarioSpec& spec);

struct Scenario {
  Dataset labeled;    // source samples plus any labeled target shots
  Dataset unlabeled;  // target samples with labels withheld
  Dataset eval;       // labelled target samples used for evaluation
  /// Labeled target shots, stored at the end of `labeled`.
  std::size_t labeled_target_count = 0;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Builds the three pools from per-domain datasets. Long-tail resampling
/// (ratio > 1) applies to every participating domain; with
/// `subpopulation_balance` the eval pool keeps the same count for every
/// (domain, class) pair.
Scenario compose_scenario(const ScenarioSpec& spec, const std::vector<Dataset>& datasets);

/// Header `f0,...,f{d-1},label,domain`; one sample per line.
Dataset load_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const Dataset& data);

}  // namespace specalign
