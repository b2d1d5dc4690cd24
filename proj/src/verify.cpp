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

#include "specalign/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "specalign/augment.hpp"
#include "specalign/error.hpp"
#include "specalign/graph.hpp"
#include "specalign/model.hpp"
#include "specalign/propagate.hpp"
#include "specalign/random.hpp"
#include "specalign/spectral.hpp"

namespace specalign {

namespace {

std::string format_matrix(const Matrix& m) {
  std::ostringstream os;
  char buf[40];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    os << "  [";
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%s%.17g", c ? ", " : "", m(r, c));
      os << buf;
    }
    os << "]\n";
  }
  return os.str();
}

std::string format_values(std::span<const double> v) {
  std::ostringstream os;
  char buf[40];
  os << '(';
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s%.17g", i ? ", " : "", v[i]);
    os << buf;
  }
  os << ')';
  return os.str();
}

std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Random connected weighted graph: a ring plus random extra edges.
Matrix random_graph(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  std::bernoulli_distribution extra(0.3);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1) || extra(rng)) {
        a(i, j) = a(j, i) = weight(rng);
      }
    }
  }
  return a;
}


// Records the first failure; later ones only count.
struct Tally {
  SuiteResult& result;
  void fail(const std::string& text) {
    if (result.violations++ == 0) result.counterexample = text;
  }
};

void eig_suite(SuiteResult& res, const VerifyOptions& opt, std::size_t trials) {
  Rng rng = derive_rng(opt.seed, 0x656967);
  Tally tally{res};
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = uniform_size(rng, 1, 16);
    const Matrix m = random_symmetric(n, rng);
    const EigDecomposition e = opt.solver(m);
    const double scale = std::max(1.0, m.frobenius_norm());
    std::ostringstream why;
    if (e.values.size() != n || e.vectors.rows() != n || e.vectors.cols() != n) {
      why << "wrong output shape";
    } else {
      double residual = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t r = 0; r < n; ++r) {
          double mv = 0.0;
          for (std::size_t k = 0; k < n; ++k) mv += m(r, k) * e.vectors(k, c);
          residual = std::max(residual, std::abs(mv - e.values[c] * e.vectors(r, c)));
        }
      }
      const Matrix gram = matmul_tn(e.vectors, e.vectors);
      double ortho = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          ortho = std::max(ortho, std::abs(gram(i, j) - (i == j ? 1.0 : 0.0)));
      bool sorted = true;
      for (std::size_t i = 0; i + 1 < n; ++i) sorted &= e.values[i] >= e.values[i + 1];
      if (residual > 1e-9 * scale) why << "residual " << residual;
      else if (ortho > 1e-9) why << "eigenvectors not orthonormal (" << ortho << ")";
      else if (!sorted) why << "eigenvalues not descending";
    }
    if (!why.str().empty()) {
      tally.fail("trial " + std::to_string(t) + ": " + why.str() + "\n eigenvalues " +
                 format_values(e.values) + "\n matrix\n" + format_matrix(m));
    }
  }
}

void spectral_suite(SuiteResult& res, const VerifyOptions& opt, std::size_t trials) {
  Rng rng = derive_rng(opt.seed, 0x737065);
  Tally tally{res};
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = uniform_size(rng, 2, 16);
    const Matrix ls = laplacian(make_graph(random_graph(n, rng), LaplacianKind::sym, n - 1));
    const Matrix lt = laplacian(make_graph(random_graph(n, rng), LaplacianKind::sym, n - 1));
    const std::vector<double> a = opt.solver(ls).values;
    const std::vector<double> b = opt.solver(lt).values;
    const double frob = sub(ls, lt).frobenius_norm();
    const double bound = frob * frob;
    double partial = 0.0;
    std::ostringstream why;
    for (std::size_t l = 0; l < n && why.str().empty(); ++l) {
      const double next = partial + (a[l] - b[l]) * (a[l] - b[l]);
      if (next < partial) why << "partial sum decreases at l = " << l + 1;
      partial = next;
    }
    if (why.str().empty() && partial > bound + 1e-9 * std::max(1.0, bound)) {
      char buf[120];
      std::snprintf(buf, sizeof(buf), "sum of squared gaps %.17g exceeds ||Ls - Lt||_F^2 = %.17g",
                    partial, bound);
      why << buf;
    }
    if (!why.str().empty()) {
      tally.fail("trial " + std::to_string(t) + ": " + why.str() + "\n spectrum s " +
                 format_values(a) + "\n spectrum t " + format_values(b) + "\n L_s\n" +
                 format_matrix(ls) + " L_t\n" + format_matrix(lt));
    }
  }
}

void smoothing_suite(SuiteResult& res, const VerifyOptions& opt, std::size_t trials) {
  Rng rng = derive_rng(opt.seed, 0x736d6f);
  Tally tally{res};
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = uniform_size(rng, 2, 20);
    const std::size_t d = uniform_size(rng, 1, 6);
    const std::size_t m = uniform_size(rng, 1, 6);
    const Matrix a = random_graph(n, rng);
    const Matrix x = random_normal(n, d, rng);
    const Matrix map = random_normal(m, d, rng);
    for (std::size_t i = 0; i < n; ++i) {
      const SmoothingGap gap = smoothing_gap(a, x, map, i);
      if (gap.lhs > gap.bound + 1e-9) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "trial %zu node %zu: lhs %.17g > bound %.17g", t, i,
                      gap.lhs, gap.bound);
        tally.fail(std::string(buf) + "\n adjacency\n" + format_matrix(a) + " map\n" +
                   format_matrix(map));
        break;
      }
    }
  }
}

void lpa_suite(SuiteResult& res, const VerifyOptions& opt, std::size_t trials) {
  Rng rng = derive_rng(opt.seed, 0x6c7061);
  Tally tally{res};
  constexpr double kPis[] = {0.1, 0.5, 0.9};
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = uniform_size(rng, 2, 64);
    const std::size_t c = uniform_size(rng, 2, 4);
    const Matrix a = random_graph(n, rng);
    Matrix y(n, c);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::bernoulli_distribution(0.3)(rng)) y(i, uniform_size(rng, 0, c - 1)) = 1.0;
    }
    const DomainGraph g = make_graph(a, LaplacianKind::sym, n - 1);
    const Matrix s = normalized_adjacency(g);
    for (double pi : kPis) {
      const Matrix closed = lpa_closed_form(a, y, pi);
      Matrix z = y;
      for (int it = 0; it < 500; ++it) z = add(scale(matmul(s, z), pi), y);
      const double gap = sub(closed, z).max_abs();
      if (gap > 1e-6) {
        char buf[120];
        std::snprintf(buf, sizeof(buf), "trial %zu pi %.1f: max |closed - iterative| = %.3g", t,
                      pi, gap);
        tally.fail(std::string(buf) + "\n adjacency\n" + format_matrix(a));
      }
    }
  }
}

void gradient_suite(SuiteResult& res, const VerifyOptions& opt, std::size_t trials) {
  Rng rng = derive_rng(opt.seed, 0x677261);
  Tally tally{res};
  constexpr double kTolerance = 1e-4;

  struct Check {
    const char* name;
    std::function<std::pair<std::function<Var(Var)>, Matrix>(Rng&)> make;
  };
  const std::vector<Check> checks = {
      {"cls",
       [](Rng& r) {
         const Matrix logits = random_normal(6, 3, r);
         std::vector<int> labels(6);
         for (int& y : labels) y = static_cast<int>(uniform_size(r, 0, 2));
         return std::make_pair(
             std::function<Var(Var)>([labels](Var x) {
               return cls_loss(ad::softmax_rows(x), labels, 0.1);
             }),
             logits);
       }},
      {"adv",
       [](Rng& r) {
         const Matrix target = random_normal(5, 1, r);
         return std::make_pair(std::function<Var(Var)>([target](Var x) {
                                 return adv_loss(x, x.tape().constant(target));
                               }),
                               random_normal(5, 1, r));
       }},
      {"gsa",
       [](Rng& r) {
         const Matrix source = random_normal(8, 3, r);
         AlignmentOptions opts;
         opts.graph.k = 3;
         return std::make_pair(std::function<Var(Var)>([source, opts](Var x) {
                                 return gsa_loss(x.tape().constant(source), x, opts);
                               }),
                               random_normal(8, 3, r));
       }},
      {"nap",
       [](Rng& r) {
         PropagationResult prop;
         prop.q = random_uniform(6, 3, r, 0.0, 1.0);
         for (std::size_t i = 0; i < 6; ++i) {
           const int y = static_cast<int>(uniform_size(r, 0, 2));
           prop.pseudo_labels.push_back(y);
           prop.confidence.push_back(prop.q(i, static_cast<std::size_t>(y)));
         }
         return std::make_pair(std::function<Var(Var)>([prop](Var x) {
                                 return nap_loss(ad::softmax_rows(x), prop);
                               }),
                               random_normal(6, 3, r));
       }},
      {"con",
       [](Rng& r) {
         const Matrix other = random_normal(6, 3, r);
         return std::make_pair(std::function<Var(Var)>([other](Var x) {
                                 return consistency_loss(
                                     ad::softmax_rows(x),
                                     ad::softmax_rows(x.tape().constant(other)), 0.7);
                               }),
                               random_normal(6, 3, r));
       }},
      {"eigenvalues of L_sym",
       [](Rng& r) {
         const Matrix weights = random_normal(8, 1, r);
         GraphOptions g;
         g.k = 3;
         return std::make_pair(std::function<Var(Var)>([weights, g](Var x) {
                                 const Var ev = ad::sym_eigvals(spectral_operator(x, g));
                                 return ad::sum(ad::mul(ev, ev.tape().constant(weights)));
                               }),
                               random_normal(8, 3, r));
       }},
  };

  for (const Check& check : checks) {
    for (std::size_t t = 0; t < trials; ++t) {
      const auto [fn, at] = check.make(rng);
      const double err = gradient_relative_error(fn, at);
      if (!(err <= kTolerance)) {
        char buf[120];
        std::snprintf(buf, sizeof(buf), "%s trial %zu: relative error %.3g", check.name, t, err);
        tally.fail(std::string(buf) + "\n point\n" + format_matrix(at));
      }
    }
  }
}

struct SuiteDef {
  const char* name;
  std::size_t default_trials;
  void (*run)(SuiteResult&, const VerifyOptions&, std::size_t);
};

constexpr SuiteDef kSuites[] = {
    {"eig", 200, eig_suite},
    {"spectral", 200, spectral_suite},
    {"smoothing", 100, smoothing_suite},
    {"lpa", 20, lpa_suite},
    {"gradients", 10, gradient_suite},
};

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const SuiteDef& s : kSuites) v.emplace_back(s.name);
    return v;
  }();
  return names;
}

SuiteResult run_suite(const std::string& name, const VerifyOptions& options) {
  for (const SuiteDef& s : kSuites) {
    if (name != s.name) continue;
    SuiteResult res;
    res.name = name;
    res.trials = options.trials > 0 ? options.trials : s.default_trials;
    const auto start = std::chrono::steady_clock::now();
    try {
      s.run(res, options, res.trials);
    } catch (const Error& e) {
      ++res.violations;
      if (res.counterexample.empty()) res.counterexample = std::string("error: ") + e.what();
    }
    res.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
  }
  throw ParameterError("unknown suite '" + name + "'");
}

int verify(const VerifyOptions& options, std::ostream& out) {
  const std::vector<std::string> selected =
      options.suites.empty() ? suite_names() : options.suites;
  bool ok = true;
  for (const std::string& name : selected) {
    const SuiteResult res = run_suite(name, options);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-10s %s  %zu trials, %zu violations, %.2fs\n",
                  res.name.c_str(), res.passed() ? "PASS" : "FAIL", res.trials, res.violations,
                  res.seconds);
    out << buf;
    if (!res.passed()) {
      ok = false;
      out << "first counterexample: " << res.counterexample << '\n';
    }
  }
  return ok ? 0 : 1;
}

double gradient_relative_error(const std::function<Var(Var)>& fn, const Matrix& at, double h) {
  Matrix analytic;
  {
    Tape tape;
    const Var x = tape.leaf(at);
    tape.backward(fn(x));
    analytic = x.grad();
  }
  auto eval = [&](const Matrix& point) {
    Tape tape;
    return fn(tape.leaf(point, false)).scalar();
  };
  Matrix numeric(at.rows(), at.cols());
  Matrix probe = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    probe[i] = at[i] + h;
    const double up = eval(probe);
    probe[i] = at[i] - h;
    const double down = eval(probe);
    probe[i] = at[i];
    numeric[i] = (up - down) / (2.0 * h);
  }
  return sub(analytic, numeric).frobenius_norm() / std::max(numeric.frobenius_norm(), 1e-6);
}

}  // namespace specalign
