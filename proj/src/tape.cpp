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

#include "specalign/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "specalign/error.hpp"

namespace specalign {

const Matrix& Var::value() const { return tape_->value(id_); }
Matrix Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw DimensionError("Var::scalar on a non-1x1 node");
  return v[0];
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Matrix value, std::span<const Var> parents, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = std::any_of(parents.begin(), parents.end(),
                                   [this](const Var& p) { return nodes_[p.id()].requires_grad; });
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) return;
  if (!node.has_grad) {
    if (!g.same_shape(node.value)) {
      throw DimensionError("Tape::accumulate: adjoint shape does not match node value");
    }
    node.grad = g;
    node.has_grad = true;
  } else {
    node.grad += g;
  }
}

Matrix Tape::grad(std::size_t id) const {
  const Node& node = nodes_[id];
  if (node.has_grad) return node.grad;
  return Matrix(node.value.rows(), node.value.cols());
}

void Tape::backward(Var root) {
  if (nodes_[root.id()].value.size() != 1) {
    throw DimensionError("Tape::backward: root must be 1x1");
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Matrix();
  }
  visits_ = 0;
  accumulate(root, Matrix(1, 1, 1.0));
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad || !node.backward) continue;
    // The closure may append to nodes_' adjoints but never to nodes_ itself.
    const Matrix g = node.grad;
    node.backward(*this, g);
    ++visits_;
  }
}

namespace ad {

namespace {

void require_same(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw DimensionError(std::string("ad::") + op + ": shape mismatch");
  }
}

template <class F>
Matrix map(const Matrix& m, F f) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = f(m[i]);
  return out;
}

// Elementwise unary op whose derivative is a function of (input, output).
template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& t = a.tape();
  Matrix out = map(a.value(), fwd);
  Var parents[] = {a};
  const std::size_t out_id = t.size();
  return t.push(std::move(out), parents, [a, out_id, deriv](Tape& tape, const Matrix& g) {
    const Matrix& x = a.value();
    const Matrix& y = tape.value(out_id);
    Matrix ga(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] = g[i] * deriv(x[i], y[i]);
    tape.accumulate(a, ga);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = a.tape();
  Var parents[] = {a, b};
  return t.push(specalign::matmul(a.value(), b.value()), parents,
                [a, b](Tape& tape, const Matrix& g) {
                  if (a.requires_grad()) tape.accumulate(a, matmul_nt(g, b.value()));
                  if (b.requires_grad()) tape.accumulate(b, matmul_tn(a.value(), g));
                });
}

Var transpose(Var a) {
  Var parents[] = {a};
  return a.tape().push(a.value().transposed(), parents,
                       [a](Tape& tape, const Matrix& g) { tape.accumulate(a, g.transposed()); });
}

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Var parents[] = {a, b};
  return a.tape().push(specalign::add(a.value(), b.value()), parents,
                       [a, b](Tape& tape, const Matrix& g) {
                         tape.accumulate(a, g);
                         tape.accumulate(b, g);
                       });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Var parents[] = {a, b};
  return a.tape().push(specalign::sub(a.value(), b.value()), parents,
                       [a, b](Tape& tape, const Matrix& g) {
                         tape.accumulate(a, g);
                         if (b.requires_grad()) tape.accumulate(b, specalign::scale(g, -1.0));
                       });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  Var parents[] = {a, b};
  return a.tape().push(hadamard(a.value(), b.value()), parents,
                       [a, b](Tape& tape, const Matrix& g) {
                         if (a.requires_grad()) tape.accumulate(a, hadamard(g, b.value()));
                         if (b.requires_grad()) tape.accumulate(b, hadamard(g, a.value()));
                       });
}

Var scale(Var a, double s) {
  Var parents[] = {a};
  return a.tape().push(specalign::scale(a.value(), s), parents,
                       [a, s](Tape& tape, const Matrix& g) {
                         tape.accumulate(a, specalign::scale(g, s));
                       });
}

Var add_scalar(Var a, double s) {
  Var parents[] = {a};
  return a.tape().push(map(a.value(), [s](double x) { return x + s; }), parents,
                       [a](Tape& tape, const Matrix& g) { tape.accumulate(a, g); });
}

Var div_scalar(Var a, Var s) {
  if (s.value().size() != 1) throw DimensionError("ad::div_scalar: divisor must be 1x1");
  const double sv = s.scalar();
  Var parents[] = {a, s};
  return a.tape().push(specalign::scale(a.value(), 1.0 / sv), parents,
                       [a, s, sv](Tape& tape, const Matrix& g) {
                         if (a.requires_grad()) tape.accumulate(a, specalign::scale(g, 1.0 / sv));
                         if (s.requires_grad()) {
                           double acc = 0.0;
                           const Matrix& av = a.value();
                           for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
                           tape.accumulate(s, Matrix(1, 1, -acc / (sv * sv)));
                         }
                       });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("ad::add_row: row must be 1 x cols");
  }
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += row.value()(0, j);
  Var parents[] = {a, row};
  return a.tape().push(std::move(out), parents, [a, row](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    if (row.requires_grad()) {
      Matrix gr(1, g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
      tape.accumulate(row, gr);
    }
  });
}

Var scale_rows(Var a, Var w) {
  if (w.rows() != a.rows() || w.cols() != 1) {
    throw DimensionError("ad::scale_rows: weights must be rows x 1");
  }
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= w.value()(i, 0);
  Var parents[] = {a, w};
  return a.tape().push(std::move(out), parents, [a, w](Tape& tape, const Matrix& g) {
    const Matrix& av = a.value();
    const Matrix& wv = w.value();
    if (a.requires_grad()) {
      Matrix ga = g;
      for (std::size_t i = 0; i < ga.rows(); ++i)
        for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) *= wv(i, 0);
      tape.accumulate(a, ga);
    }
    if (w.requires_grad()) {
      Matrix gw(wv.rows(), 1);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gw(i, 0) += g(i, j) * av(i, j);
      tape.accumulate(w, gw);
    }
  });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a, double floor) {
  return unary(
      a, [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Var sqrt(Var a) {
  return unary(
      a, [](double x) { return std::sqrt(std::max(x, 0.0)); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var reciprocal(Var a) {
  return unary(a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Var pow(Var a, double exponent) {
  return unary(
      a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var softplus(Var a) {
  return unary(
      a,
      [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row_span(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      out(i, j) = std::exp(x(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) /= z;
  }
  Var parents[] = {a};
  const std::size_t out_id = a.tape().size();
  return a.tape().push(std::move(out), parents, [a, out_id](Tape& tape, const Matrix& g) {
    const Matrix& y = tape.value(out_id);
    Matrix ga(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) = y(i, j) * (g(i, j) - dot);
    }
    tape.accumulate(a, ga);
  });
}

Var maximum(Var a, Var b) {
  require_same(a, b, "maximum");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::max(av[i], bv[i]);
  Var parents[] = {a, b};
  return a.tape().push(std::move(out), parents, [a, b](Tape& tape, const Matrix& g) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    Matrix ga(av.rows(), av.cols());
    Matrix gb(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.size(); ++i) {
      if (av[i] >= bv[i]) {
        ga[i] = g[i];
      } else {
        gb[i] = g[i];
      }
    }
    tape.accumulate(a, ga);
    tape.accumulate(b, gb);
  });
}

Var row_sum(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, 0) += x(i, j);
  Var parents[] = {a};
  return a.tape().push(std::move(out), parents, [a](Tape& tape, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) = g(i, 0);
    tape.accumulate(a, ga);
  });
}

Var sum(Var a) {
  Var parents[] = {a};
  return a.tape().push(Matrix(1, 1, a.value().sum()), parents,
                       [a](Tape& tape, const Matrix& g) {
                         tape.accumulate(a, Matrix(a.rows(), a.cols(), g[0]));
                       });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var row_norm(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (double v : x.row_span(i)) s += v * v;
    out(i, 0) = std::sqrt(s);
  }
  Var parents[] = {a};
  const std::size_t out_id = a.tape().size();
  return a.tape().push(std::move(out), parents, [a, out_id](Tape& tape, const Matrix& g) {
    const Matrix& x = a.value();
    const Matrix& nrm = tape.value(out_id);
    Matrix ga(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (nrm(i, 0) == 0.0) continue;
      for (std::size_t j = 0; j < x.cols(); ++j) ga(i, j) = g(i, 0) * x(i, j) / nrm(i, 0);
    }
    tape.accumulate(a, ga);
  });
}

Var pick(Var a, std::span<const int> index) {
  const Matrix& x = a.value();
  if (index.size() != x.rows()) throw DimensionError("ad::pick: one index per row required");
  Matrix out(x.rows(), 1);
  std::vector<int> idx(index.begin(), index.end());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= x.cols()) {
      throw DimensionError("ad::pick: column index out of range");
    }
    out(i, 0) = x(i, static_cast<std::size_t>(idx[i]));
  }
  Var parents[] = {a};
  return a.tape().push(std::move(out), parents,
                       [a, idx = std::move(idx)](Tape& tape, const Matrix& g) {
                         Matrix ga(a.rows(), a.cols());
                         for (std::size_t i = 0; i < idx.size(); ++i)
                           ga(i, static_cast<std::size_t>(idx[i])) = g(i, 0);
                         tape.accumulate(a, ga);
                       });
}

Var gradient_reversal(Var a, double lambda) {
  Var parents[] = {a};
  return a.tape().push(a.value(), parents, [a, lambda](Tape& tape, const Matrix& g) {
    tape.accumulate(a, specalign::scale(g, -lambda));
  });
}

Var detach(Var a) { return a.tape().constant(a.value()); }

Var concat_rows(Var a, Var b) {
  if (a.cols() != b.cols()) throw DimensionError("ad::concat_rows: column mismatch");
  std::vector<double> data(a.value().data());
  data.insert(data.end(), b.value().data().begin(), b.value().data().end());
  Var parents[] = {a, b};
  const std::size_t split = a.value().size();
  return a.tape().push(Matrix(a.rows() + b.rows(), a.cols(), std::move(data)), parents,
                       [a, b, split](Tape& tape, const Matrix& g) {
                         const auto& gd = g.data();
                         if (a.requires_grad()) {
                           tape.accumulate(a, Matrix(a.rows(), a.cols(),
                                                     std::vector<double>(gd.begin(),
                                                                         gd.begin() + split)));
                         }
                         if (b.requires_grad()) {
                           tape.accumulate(b, Matrix(b.rows(), b.cols(),
                                                     std::vector<double>(gd.begin() + split,
                                                                         gd.end())));
                         }
                       });
}

Var pairwise_sq_dist(Var x) {
  const Matrix& xv = x.value();
  const std::size_t n = xv.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < xv.cols(); ++k) {
        const double d = xv(i, k) - xv(j, k);
        s += d * d;
      }
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  Var parents[] = {x};
  return x.tape().push(std::move(out), parents, [x](Tape& tape, const Matrix& g) {
    const Matrix& xv = x.value();
    const std::size_t n = xv.rows();
    Matrix gx(n, xv.cols());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = 2.0 * (g(i, j) + g(j, i));
        if (w == 0.0) continue;
        for (std::size_t k = 0; k < xv.cols(); ++k) gx(i, k) += w * (xv(i, k) - xv(j, k));
      }
    }
    tape.accumulate(x, gx);
  });
}

Var median_pairwise_distance(Var d2) {
  const Matrix& dv = d2.value();
  const std::size_t n = dv.rows();
  if (n < 2 || !dv.is_square()) {
    throw DimensionError("ad::median_pairwise_distance: needs a square matrix with n >= 2");
  }
  struct Pair {
    double d;
    std::size_t i;
    std::size_t j;
  };
  std::vector<Pair> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.push_back({dv(i, j), i, j});
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.d < b.d; });
  const std::size_t m = pairs.size();
  std::vector<Pair> chosen;
  if (m % 2 == 1) {
    chosen = {pairs[m / 2]};
  } else {
    chosen = {pairs[m / 2 - 1], pairs[m / 2]};
  }
  double med = 0.0;
  for (const Pair& p : chosen) med += std::sqrt(std::max(p.d, 0.0));
  med /= static_cast<double>(chosen.size());
  Var parents[] = {d2};
  return d2.tape().push(Matrix(1, 1, med), parents,
                        [d2, chosen = std::move(chosen)](Tape& tape, const Matrix& g) {
                          Matrix gd(d2.rows(), d2.cols());
                          const double share = g[0] / static_cast<double>(chosen.size());
                          for (const Pair& p : chosen) {
                            const double r = std::sqrt(std::max(p.d, 0.0));
                            if (r == 0.0) continue;
                            gd(p.i, p.j) += 0.5 * share / r;
                          }
                          tape.accumulate(d2, gd);
                        });
}

Var sym_eigvals(Var m) {
  auto decomp = std::make_shared<EigDecomposition>(sym_eig(m.value()));
  Matrix out = Matrix::column(decomp->values);
  Var parents[] = {m};
  return m.tape().push(std::move(out), parents, [m, decomp](Tape& tape, const Matrix& g) {
    // sym_eig works on (M + M^T)/2, so the adjoint is already symmetric.
    tape.accumulate(m, eig_values_backward(*decomp, g.values()));
  });
}

Var lp_norm(Var v, double p) {
  if (!(p >= 1.0)) throw ParameterError("ad::lp_norm: p must be >= 1");
  const Matrix& x = v.value();
  double norm = 0.0;
  if (p == 1.0) {
    for (double e : x.values()) norm += std::abs(e);
  } else {
    for (double e : x.values()) norm += std::pow(std::abs(e), p);
    norm = std::pow(norm, 1.0 / p);
  }
  Var parents[] = {v};
  return v.tape().push(Matrix(1, 1, norm), parents, [v, p, norm](Tape& tape, const Matrix& g) {
    const Matrix& x = v.value();
    Matrix gv(x.rows(), x.cols());
    if (norm > 0.0) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = std::abs(x[i]);
        const double sgn = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        gv[i] = p == 1.0 ? g[0] * sgn : g[0] * sgn * std::pow(a / norm, p - 1.0);
      }
    }
    tape.accumulate(v, gv);
  });
}

}  // namespace ad

}  // namespace specalign
