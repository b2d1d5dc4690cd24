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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "specalign/error.hpp"
#include "specalign/graph.hpp"
#include "specalign/propagate.hpp"
#include "specalign/random.hpp"

using namespace specalign;
using doctest::Approx;

namespace {

Matrix random_probabilities(std::size_t n, std::size_t c, Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix p(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += p(i, j) = u(rng);
    for (std::size_t j = 0; j < c; ++j) p(i, j) /= s;
  }
  return p;
}

MemoryBank filled_bank(const Matrix& probs, const Matrix& feats) {
  BankOptions opts;
  opts.xi = 0.0;
  MemoryBank bank(probs.rows(), probs.cols(), feats.cols(), opts);
  for (std::size_t i = 0; i < probs.rows(); ++i) bank.ema_update(i, probs.row_span(i), feats.row_span(i));
  return bank;
}

// Neighbour average computed from scratch: cosine similarities, full sort, mean.
Matrix brute_q(const Matrix& bank_p, const Matrix& bank_f, const Matrix& queries, std::size_t k,
               std::span<const std::size_t> self) {
  Matrix q(queries.rows(), bank_p.cols());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t j = 0; j < bank_f.rows(); ++j) {
      if (!self.empty() && self[i] == j) continue;
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t d = 0; d < bank_f.cols(); ++d) {
        ab += queries(i, d) * bank_f(j, d);
        aa += queries(i, d) * queries(i, d);
        bb += bank_f(j, d) * bank_f(j, d);
      }
      scored.emplace_back(-ab / std::sqrt(aa * bb), j);
    }
    std::sort(scored.begin(), scored.end());
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < bank_p.cols(); ++c) q(i, c) += bank_p(scored[r].second, c) / k;
  }
  return q;
}

Matrix random_adjacency(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::bernoulli_distribution edge(0.3);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;  // ring keeps every vertex connected
    if (i != j) a(i, j) = a(j, i) = u(rng);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (edge(rng)) a(i, j) = a(j, i) = u(rng);
  return a;
}

// Iterates Z <- pi S Z + Y.
Matrix lpa_iterative(const Matrix& a, const Matrix& y, double pi, int steps) {
  const std::size_t n = a.rows();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i] += a(i, j);
  Matrix z = y;
  for (int s = 0; s < steps; ++s) {
    Matrix next = y;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double w = pi * a(i, j) / std::sqrt(d[i] * d[j]);
        if (w == 0.0) continue;
        for (std::size_t c = 0; c < y.cols(); ++c) next(i, c) += w * z(j, c);
      }
    z = std::move(next);
  }
  return z;
}

}  // namespace

TEST_CASE("neighbour average") {
  Rng rng(3);

  SUBCASE("k = 1 returns the single neighbour's vector") {
    const Matrix bp{{0.7, 0.3}, {0.1, 0.9}};
    const Matrix bf{{1, 0}, {0, 1}};
    const MemoryBank bank = filled_bank(bp, bf);
    const PropagationResult r = neighbor_average(bank, Matrix{{0.1, 1.0}}, Matrix{{0.5, 0.5}}, 1);
    CHECK(r.q(0, 0) == Approx(0.1));
    CHECK(r.q(0, 1) == Approx(0.9));
  }

  SUBCASE("identical entries give the entry everywhere") {
    Matrix bp(6, 3);
    for (std::size_t i = 0; i < 6; ++i) {
      bp(i, 0) = 0.2;
      bp(i, 1) = 0.5;
      bp(i, 2) = 0.3;
    }
    const MemoryBank bank = filled_bank(bp, random_normal(6, 2, rng));
    const PropagationResult r =
        neighbor_average(bank, random_normal(4, 2, rng), random_probabilities(4, 3, rng), 3);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(r.q(i, 0) == Approx(0.2));
      CHECK(r.q(i, 1) == Approx(0.5));
      CHECK(r.q(i, 2) == Approx(0.3));
    }
  }

  SUBCASE("matches brute force with and without self exclusion") {
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t cap = 6 + static_cast<std::size_t>(trial) * 2;
      const std::size_t k = 1 + static_cast<std::size_t>(trial % 8);
      const Matrix bp = random_probabilities(cap, 3, rng);
      const Matrix bf = random_normal(cap, 4, rng);
      const MemoryBank bank = filled_bank(bp, bf);
      const Matrix queries = random_normal(5, 4, rng);
      const Matrix model = random_probabilities(5, 3, rng);
      std::vector<std::size_t> self{0, 1, 2, 3, 4};
      const PropagationResult a = neighbor_average(bank, queries, model, k);
      const PropagationResult b = neighbor_average(bank, queries, model, k, self);
      CHECK(oracle::max_abs_diff(a.q, brute_q(bp, bf, queries, k, {})) < 1e-12);
      CHECK(oracle::max_abs_diff(b.q, brute_q(bp, bf, queries, k, self)) < 1e-12);
      const auto labels = row_argmax(model);
      CHECK(b.pseudo_labels == labels);
      for (std::size_t i = 0; i < 5; ++i) {
        CHECK(b.confidence[i] == b.q(i, static_cast<std::size_t>(labels[i])));
        CHECK(b.confidence[i] >= 0.0);
        CHECK(b.confidence[i] <= 1.0);
      }
    }
  }
}

TEST_CASE("nap loss worked values") {
  PropagationResult prop;
  prop.q = Matrix{{1.0, 0.0}, {0.5, 0.5}};
  prop.pseudo_labels = {0, 0};
  prop.confidence = {1.0, 0.5};
  const Matrix p{{0.9, 0.1}, {0.6, 0.4}};
  const double expected = -0.5 * (std::log(0.9) + 0.5 * std::log(0.6));
  CHECK(nap_loss(p, prop) == Approx(expected).epsilon(1e-12));
  CHECK(expected == Approx(0.18039).epsilon(1e-4));
  Tape tape;
  CHECK(nap_loss(tape.constant(p), prop).scalar() == Approx(expected).epsilon(1e-12));

  CHECK(nap_loss(Matrix{{1.0, 0.0}, {1.0, 0.0}}, prop) == 0.0);
  PropagationResult zero = prop;
  zero.confidence = {0.0, 0.0};
  CHECK(nap_loss(p, zero) == 0.0);
  // Zero probability at the pseudo-label is floored rather than infinite.
  CHECK(std::isfinite(nap_loss(Matrix{{0.0, 1.0}, {0.0, 1.0}}, prop)));
  CHECK_THROWS_AS(nap_loss(Matrix{{0.5, 0.5}}, prop), DimensionError);
}

TEST_CASE("nap++ gating") {
  PropagationResult prop;
  prop.q = Matrix{{0.8, 0.2}, {0.7, 0.3}};
  prop.pseudo_labels = {0, 0};
  prop.confidence = {0.8, 0.7};
  Tape tape;
  const Var p = tape.constant(Matrix{{0.9, 0.1}, {0.6, 0.4}});
  const Var pa = tape.constant(Matrix{{0.7, 0.3}, {0.5, 0.5}});
  const double both = -(0.8 * std::log(0.7) + 0.7 * std::log(0.5));
  CHECK(nap_plus_loss(p, pa, prop, 0.0).scalar() == Approx(both));
  CHECK(nap_plus_loss(p, pa, prop, 0.8).scalar() == Approx(-0.8 * std::log(0.7)));
  CHECK(nap_plus_loss(p, pa, prop, 1.0 + 1e-9).scalar() == 0.0);
  CHECK(nap_plus_loss(p, pa, prop, 0.0, true).scalar() == Approx(both / 2.0));
  CHECK_THROWS_AS(nap_plus_loss(p, pa, prop, -0.1), ParameterError);
}

TEST_CASE("nap gradients match finite differences") {
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix logits = random_normal(5, 3, rng);
    const Matrix aug = random_normal(5, 3, rng);
    PropagationResult prop;
    prop.q = random_probabilities(5, 3, rng);
    prop.pseudo_labels = row_argmax(random_normal(5, 3, rng));
    for (std::size_t i = 0; i < 5; ++i)
      prop.confidence.push_back(prop.q(i, static_cast<std::size_t>(prop.pseudo_labels[i])));

    Tape tape;
    const Var x = tape.leaf(logits);
    tape.backward(nap_loss(ad::softmax_rows(x), prop));
    const Matrix fd = oracle::fd_gradient(
        [&](const Matrix& m) {
          Tape t;
          return nap_loss(ad::softmax_rows(t.constant(m)), prop).scalar();
        },
        logits);
    CHECK(oracle::rel_err(x.grad(), fd) < 1e-4);

    Tape t2;
    const Var xa = t2.leaf(aug);
    const Var clean = t2.constant(random_probabilities(5, 3, rng));
    t2.backward(nap_plus_loss(clean, ad::softmax_rows(xa), prop, 0.3));
    const Matrix fd2 = oracle::fd_gradient(
        [&](const Matrix& m) {
          Tape t;
          return nap_plus_loss(t.constant(clean.value()), ad::softmax_rows(t.constant(m)), prop, 0.3)
              .scalar();
        },
        aug);
    CHECK(oracle::rel_err(xa.grad(), fd2) < 1e-4);
  }
}

TEST_CASE("closed-form label propagation") {
  SUBCASE("pi = 0 returns the seeds") {
    Rng rng(1);
    const Matrix a = random_adjacency(6, rng);
    const Matrix y = random_probabilities(6, 2, rng);
    CHECK(oracle::max_abs_diff(lpa_closed_form(a, y, 0.0), y) < 1e-15);
  }

  SUBCASE("two-node worked value") {
    const Matrix z = lpa_closed_form(Matrix{{0, 1}, {1, 0}}, Matrix{{1, 0}, {0, 0}}, 0.5);
    CHECK(z(0, 0) == Approx(4.0 / 3.0));
    CHECK(z(1, 0) == Approx(2.0 / 3.0));
    CHECK(z(0, 1) == 0.0);
    CHECK(row_argmax(z)[1] == 0);
  }

  SUBCASE("agrees with the iterative fixed point") {
    Rng rng(7);
    for (double pi : {0.1, 0.5, 0.9}) {
      for (std::size_t n : {8, 24, 64}) {
        const Matrix a = random_adjacency(n, rng);
        const Matrix y = random_probabilities(n, 3, rng);
        CHECK(oracle::max_abs_diff(lpa_closed_form(a, y, pi), lpa_iterative(a, y, pi, 500)) < 1e-6);
      }
    }
  }

  SUBCASE("errors") {
    const Matrix a{{0, 1}, {1, 0}};
    CHECK_THROWS_AS(lpa_closed_form(a, Matrix{{1, 0}, {0, 1}}, 1.0), ParameterError);
    CHECK_THROWS_AS(lpa_closed_form(a, Matrix{{1, 0}}, 0.5), DimensionError);
    CHECK_THROWS_AS(lpa_closed_form(Matrix{{0, 0}, {0, 0}}, Matrix{{1, 0}, {0, 1}}, 0.5),
                    DegenerateInputError);
  }
}

TEST_CASE("smoothing gap") {
  SUBCASE("exact smoothing gives zero") {
    // Node 1 sits at the mean of its two neighbours.
    const Matrix a{{0, 1, 0}, {1, 0, 1}, {0, 1, 0}};
    const Matrix x{{0.0, 2.0}, {1.0, 3.0}, {2.0, 4.0}};
    const SmoothingGap g = smoothing_gap(a, x, Matrix{{1.0, -2.0}}, 1);
    CHECK(std::abs(g.lhs) < 1e-15);
    CHECK(std::abs(g.bound) < 1e-15);
  }

  SUBCASE("identity map on one-dimensional features is tight") {
    const Matrix a{{0, 1, 2}, {1, 0, 1}, {2, 1, 0}};
    const Matrix x{{1.0}, {4.0}, {-2.0}};
    const SmoothingGap g = smoothing_gap(a, x, Matrix{{1.0}}, 0);
    const double eps = 1.0 - (4.0 + 2.0 * -2.0) / 3.0;
    CHECK(g.lhs == Approx(std::abs(eps)));
    CHECK(g.bound == Approx(std::abs(eps)));
  }

  SUBCASE("bound holds for random graphs and linear maps") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 3 + static_cast<std::size_t>(trial % 18);
      const Matrix a = random_adjacency(n, rng);
      const Matrix x = random_normal(n, 4, rng);
      const Matrix m = random_normal(2, 4, rng);
      for (std::size_t i = 0; i < n; ++i) {
        const SmoothingGap g = smoothing_gap(a, x, m, i);
        CHECK(g.lhs <= g.bound + 1e-9);
      }
    }
  }

  CHECK_THROWS_AS(smoothing_gap(Matrix{{0, 1}, {1, 0}}, Matrix{{1.0}, {2.0}}, Matrix{{1.0}}, 2),
                  KeyError);
}
