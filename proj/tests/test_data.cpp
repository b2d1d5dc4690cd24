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
#include <filesystem>
#include <fstream>
#include <set>

#include "specalign/data.hpp"
#include "specalign/error.hpp"

using namespace specalign;
using doctest::Approx;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << contents;
  return path;
}

std::array<double, 2> mean_of_class(const Dataset& d, int label) {
  std::array<double, 2> m{0.0, 0.0};
  int n = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.labels[i] != label) continue;
    m[0] += d.features(i, 0);
    m[1] += d.features(i, 1);
    ++n;
  }
  return {m[0] / n, m[1] / n};
}

}  // namespace

TEST_CASE("two moons") {
  const Dataset a = make_two_moons(200, 0.0, 0.1, 5);
  CHECK(a == make_two_moons(200, 0.0, 0.1, 5));
  CHECK(a == make_two_moons(200, 360.0, 0.1, 5));
  CHECK(a.size() == 200);
  CHECK(a.classes == 2);
  CHECK(class_counts(a) == std::vector<std::size_t>{100, 100});
  CHECK_NOTHROW(validate(a));
  CHECK_THROWS_AS(make_two_moons(201, 0.0, 0.1, 5), ParameterError);
  CHECK_THROWS_AS(make_two_moons(200, 0.0, -0.1, 5), ParameterError);

  SUBCASE("rotation acts as an exact rotation of each sample") {
    const Dataset r = make_two_moons(200, 45.0, 0.1, 5);
    const double c = std::cos(std::numbers::pi / 4), s = std::sin(std::numbers::pi / 4);
    for (std::size_t i = 0; i < 200; ++i) {
      CHECK(r.labels[i] == a.labels[i]);
      CHECK(r.features(i, 0) == Approx(c * a.features(i, 0) - s * a.features(i, 1)));
      CHECK(r.features(i, 1) == Approx(s * a.features(i, 0) + c * a.features(i, 1)));
    }
  }

  SUBCASE("noise-free class means rotate by exactly the angle") {
    const auto m0 = moon_class_means(0.0);
    const auto m45 = moon_class_means(45.0);
    for (int k = 0; k < 2; ++k) {
      const double angle0 = std::atan2(m0[k][1], m0[k][0]);
      const double angle45 = std::atan2(m45[k][1], m45[k][0]);
      CHECK(std::remainder(angle45 - angle0 - std::numbers::pi / 4, 2 * std::numbers::pi) ==
            Approx(0.0).epsilon(1e-12));
      CHECK(std::hypot(m0[k][0], m0[k][1]) == Approx(std::hypot(m45[k][0], m45[k][1])));
    }
    // Large noise-free samples approach the analytic means.
    const Dataset big = make_two_moons(200000, 45.0, 0.0, 3);
    for (int k = 0; k < 2; ++k) {
      const auto m = mean_of_class(big, k);
      CHECK(m[0] == Approx(m45[k][0]).epsilon(0.01));
      CHECK(m[1] == Approx(m45[k][1]).epsilon(0.01));
    }
  }
}

TEST_CASE("blob shift") {
  const std::vector<double> zero{0.0, 0.0};
  const auto [s0, t0] = make_blob_shift(300, 3, zero, 0.3, 4);
  CHECK(s0.domains.front() == 0);
  CHECK(t0.domains.front() == 1);
  for (int k = 0; k < 3; ++k) {
    const auto ms = mean_of_class(s0, k);
    const auto mt = mean_of_class(t0, k);
    CHECK(std::abs(ms[0] - mt[0]) < 0.15);
    CHECK(std::abs(ms[1] - mt[1]) < 0.15);
  }
  const std::vector<double> shift{5.0, 0.0};
  const auto [s1, t1] = make_blob_shift(300, 3, shift, 0.3, 4);
  const auto [s2, t2] = make_blob_shift(300, 3, shift, 0.3, 4);
  CHECK(s1 == s2);
  CHECK(t1 == t2);
  for (int k = 0; k < 3; ++k) {
    CHECK(mean_of_class(t1, k)[0] - mean_of_class(s1, k)[0] == Approx(5.0).epsilon(0.05));
  }
  CHECK_THROWS_AS(make_blob_shift(300, 1, shift, 0.3, 4), ParameterError);
}

TEST_CASE("long-tail resampling") {
  const auto [src, tgt] = make_blob_shift(300, 3, std::vector<double>{0.0, 0.0}, 0.3, 1);
  CHECK(class_counts(long_tail_resample(src, 1.0, 2)) == class_counts(src));
  const Dataset lt = long_tail_resample(src, 10.0, 2);
  CHECK(class_counts(lt) == std::vector<std::size_t>{100, 32, 10});
  CHECK(lt == long_tail_resample(src, 10.0, 2));
  CHECK_THROWS_AS(long_tail_resample(src, 1000.0, 2), ParameterError);
  CHECK_THROWS_AS(long_tail_resample(src, 0.5, 2), ParameterError);
}

TEST_CASE("scenario composition") {
  std::vector<Dataset> domains;
  for (int d = 0; d < 3; ++d) {
    auto [s, t] = make_blob_shift(100 * (d + 1), 4, std::vector<double>{1.0, 0.0}, 0.3, 7 + d);
    std::fill(s.domains.begin(), s.domains.end(), d);
    domains.push_back(s);
  }
  auto [extra, target] = make_blob_shift(200, 4, std::vector<double>{2.0, 1.0}, 0.3, 11);
  std::fill(target.domains.begin(), target.domains.end(), 3);
  domains.push_back(target);

  SUBCASE("uda") {
    ScenarioSpec spec;
    spec.source_domains = {0};
    spec.target_domains = {3};
    const Scenario s = compose_scenario(spec, domains);
    CHECK(s.labeled_target_count == 0);
    CHECK(s.labeled.size() == 100);
    CHECK(s.unlabeled.size() == 200);
    CHECK(s.eval.size() == 200);
    CHECK(s.eval.split == Split::test);
    for (int y : s.unlabeled.labels) CHECK(y == kHiddenLabel);
    CHECK(s.eval.features == s.unlabeled.features);
  }

  SUBCASE("ssda picks shots per class without leaking them") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::ssda;
    spec.labeled_target_shots = 3;
    spec.source_domains = {0};
    spec.target_domains = {3};
    const Scenario s = compose_scenario(spec, domains);
    CHECK(s.labeled_target_count == 12);
    CHECK(s.labeled.size() == 112);
    std::vector<int> per_class(4, 0);
    for (std::size_t i = 100; i < 112; ++i) {
      CHECK(s.labeled.domains[i] == 3);
      ++per_class[static_cast<std::size_t>(s.labeled.labels[i])];
    }
    CHECK(per_class == std::vector<int>{3, 3, 3, 3});
    CHECK(s.eval.size() == 188);
    CHECK(compose_scenario(spec, domains) == s);
    spec.labeled_target_shots = 60;
    CHECK_THROWS_AS(compose_scenario(spec, domains), CapacityError);
  }

  SUBCASE("msda concatenates sources with their domain ids") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::msda;
    spec.source_domains = {0, 1, 2};
    spec.target_domains = {3};
    const Scenario s = compose_scenario(spec, domains);
    CHECK(s.labeled.size() == 600);
    CHECK(std::set<int>(s.labeled.domains.begin(), s.labeled.domains.end()) ==
          std::set<int>{0, 1, 2});
  }

  SUBCASE("mtda merges targets") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::mtda;
    spec.source_domains = {3};
    spec.target_domains = {0, 1};
    const Scenario s = compose_scenario(spec, domains);
    CHECK(s.unlabeled.size() == 300);
    CHECK(std::set<int>(s.eval.domains.begin(), s.eval.domains.end()) == std::set<int>{0, 1});
  }

  SUBCASE("subpopulation balance equalises every domain-class pair") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::mtda;
    spec.source_domains = {3};
    spec.target_domains = {0, 1};
    spec.imbalance_ratio = 4.0;
    spec.subpopulation_balance = true;
    const Scenario s = compose_scenario(spec, domains);
    std::map<std::pair<int, int>, int> cells;
    for (std::size_t i = 0; i < s.eval.size(); ++i) ++cells[{s.eval.domains[i], s.eval.labels[i]}];
    CHECK(cells.size() == 8);
    for (const auto& [key, count] : cells) CHECK(count == cells.begin()->second);
  }

  SUBCASE("invalid specs") {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::ssda;
    CHECK_THROWS_AS(validate(spec), ParameterError);
    spec.kind = ScenarioKind::msda;
    CHECK_THROWS_AS(validate(spec), ParameterError);
    spec.kind = ScenarioKind::mtda;
    CHECK_THROWS_AS(validate(spec), ParameterError);
    spec.kind = ScenarioKind::uda;
    spec.labeled_target_shots = 1;
    CHECK_THROWS_AS(validate(spec), ParameterError);
    CHECK_THROWS_AS(parse_scenario("zsda"), ParameterError);
    CHECK(to_string(parse_scenario("mtda")) == "mtda");
  }
}

TEST_CASE("csv ingestion") {
  SUBCASE("well-formed file") {
    const auto p = temp_file("sa_ok.csv", "f0,f1,label,domain\n0.5,1,0,0\n-2,3e-1,1,0\n4,5,2,1\n");
    const Dataset d = load_csv(p);
    CHECK(d.size() == 3);
    CHECK(d.dim() == 2);
    CHECK(d.classes == 3);
    CHECK(d.features(1, 1) == 0.3);
    CHECK(d.domains == std::vector<int>{0, 0, 1});
  }

  SUBCASE("round trip") {
    const Dataset d = make_two_moons(50, 30.0, 0.2, 9);
    const auto p = std::filesystem::temp_directory_path() / "sa_rt.csv";
    write_csv(p, d);
    CHECK(load_csv(p) == d);
  }

  SUBCASE("schema and parse errors") {
    CHECK_THROWS_AS(load_csv(temp_file("sa_nolabel.csv", "f0,f1,domain\n1,2,0\n")), SchemaError);
    CHECK_THROWS_AS(load_csv(temp_file("sa_width.csv", "f0,label,domain\n1,0,0\n1,0\n")),
                    SchemaError);
    try {
      load_csv(temp_file("sa_bad.csv", "f0,label,domain\n1,0,0\n2,0,0\nabc,1,0\n"));
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }
    CHECK_THROWS_AS(load_csv(std::filesystem::temp_directory_path() / "sa_missing.csv"), Error);
  }
}
