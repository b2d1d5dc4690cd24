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
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace specalign {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const double> values);
  static Matrix row(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  Matrix transposed() const;
  double frobenius_norm() const;
  double sum() const;
  double max_abs() const;
  bool all_finite() const;
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * b^T without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix transpose(const Matrix& a);
Matrix symmetrize(const Matrix& a);

/// Solves M X = B by LU with partial pivoting. Throws SingularityError when a
/// pivot falls below 1e-12 in magnitude.
Matrix solve(const Matrix& m, const Matrix& b);

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending.
struct EigDecomposition {
  std::vector<double> values;
  Matrix vectors;  // column i pairs with values[i]
  int sweeps = 0;
  /// Adjacent eigenvalues closer than 1e-9; their eigenvectors are not unique.
  bool has_near_degenerate = false;
};

/// Cyclic Jacobi eigensolver. The input is symmetrised as (M + M^T)/2.
/// Stops once off(M) < 1e-12 * ||M||_F; throws NumericalError (carrying the
/// remaining off-diagonal norm) after 100 sweeps.
EigDecomposition sym_eig(const Matrix& m);

/// Gradient of sum_i upstream_i * lambda_i with respect to the matrix:
/// sum_i upstream_i u_i u_i^T.
Matrix eig_values_backward(const EigDecomposition& decomp, std::span<const double> upstream);

/// Signature shared by interchangeable eigensolvers (the verifier accepts any).
using EigenSolver = std::function<EigDecomposition(const Matrix&)>;

/// Largest singular value, via the eigenvalues of M^T M.
double spectral_norm(const Matrix& m);

}  // namespace specalign
