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
#include <random>

#include "specalign/linalg.hpp"

namespace specalign {

using Rng = std::mt19937_64;

/// Independent child stream; `salt` distinguishes consumers of one seed.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  return Rng(seq);
}

inline Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

inline Matrix random_uniform(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

inline Matrix random_symmetric(std::size_t n, Rng& rng) {
  Matrix m = random_normal(n, n, rng);
  return symmetrize(m);
}

}  // namespace specalign
