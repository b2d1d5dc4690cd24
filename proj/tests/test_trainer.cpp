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

#include "oracles.hpp"
#include "specalign/error.hpp"
#include "specalign/trainer.hpp"

using namespace specalign;
using doctest::Approx;

namespace {

Scenario small_scenario(std::uint64_t seed, ScenarioKind kind = ScenarioKind::uda, int shots = 0) {
  std::vector<Dataset> domains{make_two_moons(96, 0.0, 0.1, seed, 0),
                               make_two_moons(96, 30.0, 0.1, seed + 1, 1)};
  ScenarioSpec spec;
  spec.kind = kind;
  spec.labeled_target_shots = shots;
  spec.seed = seed;
  return compose_scenario(spec, domains);
}

TrainConfig small_config(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.hidden_dim = 16;
  c.feature_dim = 8;
  c.batch_size = 16;
  c.k = 3;
  c.epochs = 2;
  c.track_a_distance = false;
  c.seed = 3;
  return c;
}

Batch take(const Dataset& d, std::size_t begin, std::size_t n) {
  Batch b;
  b.inputs = Matrix(n, d.dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d.dim(); ++j) b.inputs(i, j) = d.features(begin + i, j);
    b.labels.push_back(d.labels[begin + i]);
    b.indices.push_back(begin + i);
  }
  return b;
}

bool same_report(const TrainReport& a, const TrainReport& b) {
  if (a.epochs != b.epochs || a.params != b.params || a.steps.size() != b.steps.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const StepRecord &x = a.steps[i], &y = b.steps[i];
    if (x.total != y.total || x.cls != y.cls || x.adv != y.adv || x.gsa != y.gsa ||
        x.nap != y.nap || x.con != y.con)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("beta schedule") {
  CHECK(beta_schedule(100.0, 100.0, 0.2) == 0.2);
  CHECK(beta_schedule(0.0, 100.0, 0.2) == Approx(0.0013476).epsilon(1e-4));
  for (double t : {0.0, 10.0, 55.0, 100.0}) CHECK(beta_schedule(t, 100.0, 0.0) == 0.0);
}

TEST_CASE("config validation and mode names") {
  CHECK_NOTHROW(validate(TrainConfig{}));
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(validate(bad([](TrainConfig& c) { c.alpha = -1.0; })), ParameterError);
  CHECK_THROWS_AS(validate(bad([](TrainConfig& c) { c.beta_max = -0.1; })), ParameterError);
  CHECK_THROWS_AS(validate(bad([](TrainConfig& c) { c.conf_threshold = 1.5; })), ParameterError);
  CHECK_THROWS_AS(validate(bad([](TrainConfig& c) { c.batch_size = 1; })), ParameterError);
  CHECK_THROWS_AS(validate(bad([](TrainConfig& c) { c.k = 32; })), ParameterError);
  CHECK_THROWS_AS(validate(bad([](TrainConfig& c) { c.xi = 1.0; })), ParameterError);
  CHECK_THROWS_AS(validate(bad([](TrainConfig& c) { c.tau = 0.0; })), ParameterError);
  CHECK_THROWS_AS(validate(bad([](TrainConfig& c) { c.head_lr_multiplier = 0.0; })),
                  ParameterError);
  for (auto m : {TrainMode::source_only, TrainMode::baseline, TrainMode::spa,
                 TrainMode::spa_plus_plus}) {
    CHECK(parse_mode(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_mode("dann"), ParameterError);
}

TEST_CASE("recorded total equals the weighted sum of its components") {
  const Scenario s = small_scenario(1);
  for (auto m : {TrainMode::source_only, TrainMode::baseline, TrainMode::spa,
                 TrainMode::spa_plus_plus}) {
    const TrainReport r = run(small_config(m), s);
    CHECK(r.epochs.size() == 3);
    for (const StepRecord& st : r.steps) {
      CHECK(std::isfinite(st.total));
      CHECK(std::abs(st.total - (st.cls + st.adv + st.alpha * st.gsa + st.beta * st.nap + st.con)) <
            1e-9);
    }
    for (const EpochRecord& e : r.epochs) {
      CHECK(std::isfinite(e.loss_cls));
      CHECK(std::isfinite(e.acc_target));
    }
  }
}

TEST_CASE("baseline reduces to classification plus adversarial loss") {
  TrainerHooks hooks;
  hooks.gsa = [](Var, Var, const AlignmentOptions&) -> Var { throw Error("gsa called"); };
  hooks.gsa_plus = [](Var, Var, Var, const AlignmentOptions&) -> Var {
    throw Error("gsa++ called");
  };
  hooks.propagate = [](const MemoryBank&, const Matrix&, const Matrix&, std::size_t,
                       std::span<const std::size_t>) -> PropagationResult {
    throw Error("propagation called");
  };
  const TrainReport r = run(small_config(TrainMode::baseline), small_scenario(2), hooks);
  for (const StepRecord& st : r.steps) {
    CHECK(st.alpha == 0.0);
    CHECK(st.beta == 0.0);
    CHECK(st.con == 0.0);
    CHECK(st.total == st.cls + st.adv);
  }
  const TrainReport so = run(small_config(TrainMode::source_only), small_scenario(2), hooks);
  for (const StepRecord& st : so.steps) CHECK(st.total == st.cls);
}

TEST_CASE("disabled terms make the run independent of their module") {
  const Scenario s = small_scenario(4);
  TrainerHooks stub_spectral;
  stub_spectral.gsa = [](Var a, Var, const AlignmentOptions&) {
    return ad::scale(ad::sum(a), 1e3);
  };
  stub_spectral.gsa_plus = [](Var a, Var, Var, const AlignmentOptions&) {
    return ad::scale(ad::sum(a), 1e3);
  };
  TrainerHooks stub_propagation;
  stub_propagation.propagate = [](const MemoryBank& bank, const Matrix& f, const Matrix& p,
                                  std::size_t, std::span<const std::size_t>) {
    PropagationResult r;
    r.q = Matrix(p.rows(), p.cols(), 1.0);
    r.pseudo_labels.assign(p.rows(), 0);
    r.confidence.assign(p.rows(), 1.0);
    (void)bank;
    (void)f;
    return r;
  };
  for (auto m : {TrainMode::spa, TrainMode::spa_plus_plus}) {
    TrainConfig no_alpha = small_config(m);
    no_alpha.alpha = 0.0;
    CHECK(same_report(run(no_alpha, s), run(no_alpha, s, stub_spectral)));
    TrainConfig no_beta = small_config(m);
    no_beta.beta_max = 0.0;
    CHECK(same_report(run(no_beta, s), run(no_beta, s, stub_propagation)));
    // The stubs do change the run when their term is active.
    CHECK_FALSE(same_report(run(small_config(m), s), run(small_config(m), s, stub_spectral)));
  }
}

TEST_CASE("fixed seed gives bitwise-identical reports") {
  const Scenario s = small_scenario(5);
  TrainConfig c = small_config(TrainMode::spa_plus_plus);
  c.track_a_distance = true;
  CHECK(same_report(run(c, s), run(c, s)));
  c.seed = 4;
  CHECK_FALSE(same_report(run(c, s), run(small_config(TrainMode::spa_plus_plus), s)));
}

TEST_CASE("zero epochs reports only the initial evaluation") {
  TrainConfig c = small_config(TrainMode::spa);
  c.epochs = 0;
  const TrainReport r = run(c, small_scenario(6));
  CHECK(r.epochs.size() == 1);
  CHECK(r.epochs[0].epoch == 0);
  CHECK(r.steps.empty());
}

TEST_CASE("single step semantics") {
  const Scenario s = small_scenario(7, ScenarioKind::ssda, 1);
  const Batch src = take(s.labeled, 0, 16);
  const Batch tgt = take(s.unlabeled, 0, 16);
  const Batch shots = take(s.labeled, s.labeled.size() - 2, 2);

  SUBCASE("identity augmentation: no consistency term and doubled alignment") {
    TrainConfig c = small_config(TrainMode::spa_plus_plus);
    c.augment = AugmentPolicy{0.0, 1.0, 1.0};
    TrainState st = init_state(c, s.labeled, s.unlabeled, 10);
    const ForwardOutput fs = forward(st.params, src.inputs);
    const ForwardOutput ft = forward(st.params, tgt.inputs);
    GraphOptions g;
    g.k = c.k;
    const double single = gsa_loss(build_graph(fs.features, g), build_graph(ft.features, g));
    const StepRecord rec = train_step(st, c, src, tgt, Batch{});
    CHECK(rec.con == 0.0);
    CHECK(std::abs(rec.gsa - 2.0 * single) < 1e-9);
    CHECK(st.step == 1);
  }

  SUBCASE("labeled target shots join the classification loss") {
    TrainConfig c = small_config(TrainMode::baseline);
    TrainState st = init_state(c, s.labeled, s.unlabeled, 10);
    const ForwardOutput fs = forward(st.params, src.inputs);
    const ForwardOutput fl = forward(st.params, shots.inputs);
    std::vector<int> labels = src.labels;
    labels.insert(labels.end(), shots.labels.begin(), shots.labels.end());
    Matrix probs(18, 2);
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = 0; j < 2; ++j) probs(i, j) = fs.probabilities(i, j);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) probs(16 + i, j) = fl.probabilities(i, j);
    const StepRecord rec = train_step(st, c, src, tgt, shots);
    CHECK(rec.cls == Approx(cls_loss(probs, labels, c.label_smoothing)).epsilon(1e-12));
  }

  SUBCASE("the bank receives the batch's fresh predictions") {
    TrainConfig c = small_config(TrainMode::spa);
    TrainState st = init_state(c, s.labeled, s.unlabeled, 10);
    REQUIRE(st.bank.has_value());
    const std::vector<double> before(st.bank->probability(0).begin(),
                                     st.bank->probability(0).end());
    const std::vector<double> untouched(st.bank->probability(20).begin(),
                                        st.bank->probability(20).end());
    train_step(st, c, src, tgt, Batch{});
    const auto after = st.bank->probability(0);
    CHECK_FALSE(std::equal(before.begin(), before.end(), after.begin()));
    const auto same = st.bank->probability(20);
    CHECK(std::equal(untouched.begin(), untouched.end(), same.begin()));
  }

  SUBCASE("mismatched batches") {
    TrainConfig c = small_config(TrainMode::spa);
    TrainState st = init_state(c, s.labeled, s.unlabeled, 10);
    CHECK_THROWS_AS(train_step(st, c, src, take(s.unlabeled, 0, 8), Batch{}), DimensionError);
  }
}

TEST_CASE("non-finite losses are rejected and repeated failures abort") {
  const Scenario s = small_scenario(8);
  int calls = 0;
  TrainerHooks once;
  once.gsa = [&calls](Var a, Var b, const AlignmentOptions& o) {
    Var v = gsa_loss(a, b, o);
    if (++calls == 2) return ad::scale(v, std::nan(""));
    return v;
  };
  const TrainReport r = run(small_config(TrainMode::spa), s, once);
  CHECK(r.steps[1].rejected);
  CHECK_FALSE(r.steps[2].rejected);
  std::size_t rejected = 0;
  for (const EpochRecord& e : r.epochs) rejected += e.rejected_steps;
  CHECK(rejected == 1);

  TrainerHooks always;
  always.gsa = [](Var a, Var b, const AlignmentOptions& o) {
    return ad::scale(gsa_loss(a, b, o), std::nan(""));
  };
  CHECK_THROWS_AS(run(small_config(TrainMode::spa), s, always), NumericalError);
}

TEST_CASE("multi-source runs report per-domain source accuracy") {
  std::vector<Dataset> domains{make_two_moons(64, 0.0, 0.1, 1, 0),
                               make_two_moons(64, 10.0, 0.1, 2, 1),
                               make_two_moons(64, 30.0, 0.1, 3, 2)};
  ScenarioSpec spec;
  spec.kind = ScenarioKind::msda;
  spec.source_domains = {0, 1};
  spec.target_domains = {2};
  const TrainReport r = run(small_config(TrainMode::spa), compose_scenario(spec, domains));
  for (const EpochRecord& e : r.epochs) {
    CHECK(e.acc_source_by_domain.size() == 2);
    CHECK(e.acc_source_by_domain.count(0) == 1);
    CHECK(e.acc_source_by_domain.count(1) == 1);
  }
}

TEST_CASE("confidence threshold, temperature and head learning rate are live settings") {
  const Scenario s = small_scenario(9);
  TrainConfig lo = small_config(TrainMode::spa_plus_plus);
  lo.conf_threshold = 0.0;
  TrainConfig hi = lo;
  hi.conf_threshold = 1.0;
  const TrainReport a = run(lo, s);
  const TrainReport b = run(hi, s);
  double nap_lo = 0.0, nap_hi = 0.0;
  for (const StepRecord& st : a.steps) nap_lo += st.nap;
  for (const StepRecord& st : b.steps) nap_hi += st.nap;
  CHECK(nap_lo > 0.0);
  CHECK(nap_hi == 0.0);

  TrainConfig sharp = small_config(TrainMode::spa);
  sharp.tau = 0.1;
  CHECK_FALSE(same_report(run(sharp, s), run(small_config(TrainMode::spa), s)));

  TrainConfig flat = small_config(TrainMode::baseline);
  flat.head_lr_multiplier = 1.0;
  CHECK_FALSE(same_report(run(flat, s), run(small_config(TrainMode::baseline), s)));
}

TEST_CASE("pools smaller than a batch are rejected") {
  std::vector<Dataset> domains{make_two_moons(10, 0.0, 0.1, 1, 0),
                               make_two_moons(10, 30.0, 0.1, 2, 1)};
  CHECK_THROWS_AS(run(small_config(TrainMode::spa), compose_scenario(ScenarioSpec{}, domains)),
                  CapacityError);
}
