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

#include "specalign/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "specalign/error.hpp"

namespace specalign {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Matrix: entry count " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Matrix::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "sub");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: " + shape_str(a) + "^T * " + shape_str(b));
  }
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: " + shape_str(a) + " * " + shape_str(b) + "^T");
  }
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  c += b;
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  c -= b;
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
  return c;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  c *= s;
  return c;
}

Matrix transpose(const Matrix& a) { return a.transposed(); }

Matrix symmetrize(const Matrix& a) {
  if (!a.is_square()) throw DimensionError("symmetrize: non-square " + shape_str(a));
  Matrix s(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

Matrix solve(const Matrix& m, const Matrix& b) {
  if (!m.is_square()) throw DimensionError("solve: non-square system " + shape_str(m));
  if (b.rows() != m.rows()) {
    throw DimensionError("solve: rhs " + shape_str(b) + " vs system " + shape_str(m));
  }
  const std::size_t n = m.rows();
  Matrix lu = m;
  Matrix x = b;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(lu(r, col)) > std::abs(lu(pivot, col))) pivot = r;
    if (std::abs(lu(pivot, col)) <= 1e-12) {
      throw SingularityError("solve: pivot " + std::to_string(lu(pivot, col)) + " at column " +
                             std::to_string(col));
    }
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(col, j), lu(pivot, j));
      for (std::size_t j = 0; j < x.cols(); ++j) std::swap(x(col, j), x(pivot, j));
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = lu(r, col) / lu(col, col);
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) lu(r, j) -= f * lu(col, j);
      for (std::size_t j = 0; j < x.cols(); ++j) x(r, j) -= f * x(col, j);
    }
  }
  for (std::size_t ri = n; ri-- > 0;) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double s = x(ri, j);
      for (std::size_t k = ri + 1; k < n; ++k) s -= lu(ri, k) * x(k, j);
      x(ri, j) = s / lu(ri, ri);
    }
  }
  return x;
}

EigDecomposition sym_eig(const Matrix& m) {
  if (!m.is_square()) throw DimensionError("sym_eig: non-square " + shape_str(m));
  const std::size_t n = m.rows();
  Matrix a = symmetrize(m);
  Matrix v = Matrix::identity(n);
  const double norm = a.frobenius_norm();
  const double threshold = 1e-12 * norm;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  double off = off_norm();
  while (off >= threshold && off > 0.0) {
    if (sweep == kMaxSweeps) {
      throw NumericalError("sym_eig: no convergence after 100 sweeps, off-diagonal norm " +
                               std::to_string(off),
                           off);
    }
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    off = off_norm();
  }

  // Descending order; ties keep the original diagonal position.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigDecomposition out;
  out.sweeps = sweep;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (out.values[i] - out.values[i + 1] < 1e-9) out.has_near_degenerate = true;
  return out;
}

Matrix eig_values_backward(const EigDecomposition& decomp, std::span<const double> upstream) {
  const std::size_t n = decomp.values.size();
  if (upstream.size() != n) {
    throw DimensionError("eig_values_backward: upstream length " +
                         std::to_string(upstream.size()) + " vs " + std::to_string(n));
  }
  Matrix g(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = upstream[k];
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double ui = w * decomp.vectors(i, k);
      for (std::size_t j = 0; j < n; ++j) g(i, j) += ui * decomp.vectors(j, k);
    }
  }
  return g;
}

double spectral_norm(const Matrix& m) {
  const auto decomp = sym_eig(matmul_tn(m, m));
  return std::sqrt(std::max(0.0, decomp.values.front()));
}

}  // namespace specalign
