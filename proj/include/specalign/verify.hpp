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

// Self-check suites run by `specalign verify`.
//
//   eig        residual, orthogonality and ordering of the eigensolver
//   spectral   partial sums of squared spectrum gaps are non-decreasing and
//              bounded by ||L_s - L_t||_F^2 (Hoffman-Wielandt)
//   smoothing  |y_i - avg_j y_j| <= ||M||_2 ||x_i - avg_j x_j|| for y = M x
//   lpa        closed-form label propagation vs. 500 fixed-point iterations
//   gradients  every loss against central finite differences

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "specalign/linalg.hpp"
#include "specalign/tape.hpp"

namespace specalign {

struct VerifyOptions {
  /// Suites to run; empty runs all of them.
  std::vector<std::string> suites;
  /// Trials per suite; 0 uses each suite's default.
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  /// Eigensolver under test (eig and spectral suites).
  EigenSolver solver = sym_eig;
};

struct SuiteResult {
  std::string name;
  std::size_t trials = 0;
  std::size_t violations = 0;
  /// Description of the first failing case, empty on success.
  std::string counterexample;
  double seconds = 0.0;

  bool passed() const noexcept { return violations == 0; }
};

const std::vector<std::string>& suite_names();

/// Runs one suite. Throws ParameterError for an unknown name.
SuiteResult run_suite(const std::string& name, const VerifyOptions& options);

/// Runs the selected suites, printing one line per suite and the first
/// counterexample of each failure. Returns 0 iff every suite passed.
int verify(const VerifyOptions& options, std::ostream& out);

/// ||g_ad - g_fd|| / max(||g_fd||, 1e-6) for a scalar function of one matrix,
/// with central differences of step `h`.
double gradient_relative_error(const std::function<Var(Var)>& fn, const Matrix& at,
                               double h = 1e-5);

}  // namespace specalign
