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

// Independent reference computations shared by the tests. Nothing here calls
// into the library's numerical routines.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "specalign/linalg.hpp"

namespace oracle {

using specalign::Matrix;

/// Central finite differences of a scalar function.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& at,
                          double h = 1e-5) {
  Matrix g(at.rows(), at.cols());
  Matrix x = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    x[i] = at[i] + h;
    const double up = f(x);
    x[i] = at[i] - h;
    const double down = f(x);
    x[i] = at[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return std::sqrt(s);
}

/// ||a - b|| / max(||b||, 1e-6).
inline double rel_err(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s) / std::max(norm(b), 1e-6);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Eigenvalues of a symmetric 3x3 matrix by the trigonometric method, descending.
inline std::array<double, 3> eig3(const Matrix& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
  if (p1 == 0.0) {
    std::array<double, 3> d{a(0, 0), a(1, 1), a(2, 2)};
    std::sort(d.begin(), d.end(), std::greater<>());
    return d;
  }
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                    (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Matrix b(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) b(i, j) = (a(i, j) - (i == j ? q : 0.0)) / p;
  const double det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                     b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                     b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return {e1, 3.0 * q - e1 - e3, e3};
}

/// Plain triple-loop product.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

}  // namespace oracle
