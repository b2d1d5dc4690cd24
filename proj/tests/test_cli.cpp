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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "specalign/cli.hpp"
#include "specalign/error.hpp"

using namespace specalign;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args, const EigenSolver& solver = sym_eig) {
  std::ostringstream out, err;
  const int code = main_entry(args, out, err, solver);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> quick_run(const fs::path& out) {
  return {"run",          "--samples", "64", "--epochs",   "2", "--batch-size", "16",
          "--k",          "3",         "--hidden-dim", "16", "--feature-dim", "8",
          "--out",        out.string()};
}

std::string resolved(const fs::path& dir, const std::string& key) {
  ExperimentConfig c;
  read_config(dir / "resolved.cfg", c);
  for (const auto& [k, v] : settings(c))
    if (k == key) return v;
  return "";
}

}  // namespace

TEST_CASE("settings round trip through a config file") {
  ExperimentConfig c;
  set_value(c, "alpha", "0.35");
  set_value(c, "mode", "spa_plus_plus");
  set_value(c, "subpop_balance", "true");
  set_value(c, "laplacian", "rwk");
  const fs::path p = fs::temp_directory_path() / "sa_roundtrip.cfg";
  write_config(p, c);
  ExperimentConfig back;
  read_config(p, back);
  CHECK(settings(back) == settings(c));
  CHECK(back.train.alpha == 0.35);
  CHECK(back.train.mode == TrainMode::spa_plus_plus);
  CHECK_THROWS_AS(set_value(c, "gamma", "1"), ParameterError);
  CHECK_THROWS_AS(set_value(c, "alpha", "lots"), ParameterError);
}

TEST_CASE("config files accept comments and reject malformed lines") {
  const fs::path p = fs::temp_directory_path() / "sa_comments.cfg";
  std::ofstream(p) << "# header\n\nalpha = 0.5  # trailing\nk=7\n";
  ExperimentConfig c;
  CHECK(read_config(p, c) == std::vector<std::string>{"alpha", "k"});
  CHECK(c.train.alpha == 0.5);
  CHECK(c.train.k == 7);
  std::ofstream(p) << "alpha 0.5\n";
  CHECK_THROWS_AS(read_config(p, c), ParameterError);
}

TEST_CASE("run writes every output file") {
  const fs::path out = fresh_dir("sa_cli_run");
  auto args = quick_run(out);
  args.insert(args.end(), {"--scenario", "uda", "--dataset", "two_moons", "--rotation", "45",
                           "--seed", "7"});
  const Result r = cli(args);
  REQUIRE(r.code == kExitOk);
  for (const char* f : {"metrics.jsonl", "curve.csv", "resolved.cfg", "checkpoint.bin",
                        "summary.json"}) {
    CHECK(fs::exists(out / f));
  }
  std::ifstream in(out / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"epoch", "loss_cls", "loss_adv", "loss_gsa", "loss_nap", "loss_con",
                            "acc_source", "acc_target", "a_distance"}) {
      CHECK(j.contains(key));
    }
    CHECK(j["epoch"] == lines);
    ++lines;
  }
  CHECK(lines == 3);
  CHECK(resolved(out, "seed") == "7");
  CHECK(resolved(out, "rotation") == "45");
}

TEST_CASE("flags override the config file, which overrides defaults") {
  const fs::path cfg = fs::temp_directory_path() / "sa_prec.cfg";
  std::ofstream(cfg) << "alpha = 0.5\ntau = 0.3\n";
  const fs::path out = fresh_dir("sa_cli_prec");
  auto args = quick_run(out);
  args.insert(args.end(), {"--config", cfg.string(), "--alpha", "0.7"});
  REQUIRE(cli(args).code == kExitOk);
  CHECK(resolved(out, "alpha") == "0.69999999999999996");
  CHECK(resolved(out, "tau") == "0.29999999999999999");
  CHECK(resolved(out, "xi") == "0.5");
}

TEST_CASE("boolean flags can be switched on and off") {
  const fs::path out = fresh_dir("sa_cli_bool");
  auto args = quick_run(out);
  args.insert(args.end(), {"--no-nap-average", "--no-sparsify", "--subpop-balance"});
  REQUIRE(cli(args).code == kExitOk);
  CHECK(resolved(out, "nap_average") == "false");
  CHECK(resolved(out, "sparsify") == "false");
  CHECK(resolved(out, "subpop_balance") == "true");
  CHECK(resolved(out, "detach_source") == "true");
}

TEST_CASE("SPA_SEED is a fallback for the seed") {
  setenv("SPA_SEED", "11", 1);
  const fs::path a = fresh_dir("sa_cli_env_a");
  REQUIRE(cli(quick_run(a)).code == kExitOk);
  CHECK(resolved(a, "seed") == "11");
  const fs::path b = fresh_dir("sa_cli_env_b");
  auto args = quick_run(b);
  args.insert(args.end(), {"--seed", "3"});
  REQUIRE(cli(args).code == kExitOk);
  CHECK(resolved(b, "seed") == "3");
  unsetenv("SPA_SEED");
}

TEST_CASE("re-running from resolved.cfg reproduces metrics bitwise") {
  const fs::path a = fresh_dir("sa_cli_det_a");
  auto args = quick_run(a);
  args.insert(args.end(), {"--mode", "spa_plus_plus", "--seed", "5"});
  REQUIRE(cli(args).code == kExitOk);
  const fs::path b = fresh_dir("sa_cli_det_b");
  REQUIRE(cli({"run", "--config", (a / "resolved.cfg").string(), "--out", b.string()}).code ==
          kExitOk);
  CHECK(slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl"));
  CHECK(slurp(a / "checkpoint.bin") == slurp(b / "checkpoint.bin"));
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(cli({"run", "--epochs", "1"}).code == kExitUsage);
  CHECK(cli({"run", "--out", "x", "--bogus", "1"}).code == kExitUsage);
  CHECK(cli({"run", "--out", "x", "--config", "/nonexistent/sa.cfg"}).code == kExitUsage);
  CHECK(cli({"run", "--out", "x", "--scenario", "ssda"}).code == kExitUsage);
  CHECK(cli({"run", "--out", "x", "--mode", "dann"}).code == kExitUsage);
  CHECK(cli({"run", "--out", "x", "--alpha", "-1"}).code == kExitUsage);
  CHECK(cli({}).code == kExitUsage);
  const Result r = cli({"run", "--epochs", "1"});
  CHECK(r.err.find("--out") != std::string::npos);
}

TEST_CASE("scenario flags reach the data layer") {
  ExperimentConfig c;
  set_value(c, "scenario", "msda");
  set_value(c, "samples", "64");
  const Scenario s = prepare_scenario(c);
  CHECK(s.labeled.size() == 128);
  set_value(c, "scenario", "ssda");
  set_value(c, "shots", "3");
  const Scenario ss = prepare_scenario(c);
  CHECK(ss.labeled_target_count == 6);
  set_value(c, "dataset", "blobs");
  set_value(c, "scenario", "mtda");
  set_value(c, "shots", "0");
  const Scenario mt = prepare_scenario(c);
  CHECK(mt.unlabeled.size() == 128);
  CHECK(mt.labeled.classes == 3);
}

TEST_CASE("csv datasets") {
  const auto [src, tgt] = make_blob_shift(64, 2, std::vector<double>{2.0, 0.0}, 0.3, 1);
  const fs::path ps = fs::temp_directory_path() / "sa_src.csv";
  const fs::path pt = fs::temp_directory_path() / "sa_tgt.csv";
  write_csv(ps, src);
  write_csv(pt, tgt);
  const fs::path out = fresh_dir("sa_cli_csv");
  auto args = quick_run(out);
  args.insert(args.end(), {"--dataset", "csv", "--source-csv", ps.string(), "--target-csv",
                           pt.string()});
  CHECK(cli(args).code == kExitOk);
}

TEST_CASE("verify subcommand") {
  const Result all = cli({"verify"});
  CHECK(all.code == kExitOk);
  for (const std::string& s : suite_names()) CHECK(all.out.find(s) != std::string::npos);

  const Result one = cli({"verify", "--suite", "spectral", "--trials", "50"});
  CHECK(one.code == kExitOk);
  CHECK(one.out.find("spectral") != std::string::npos);
  CHECK(one.out.find("lpa") == std::string::npos);
  CHECK(one.out.find("50 trials") != std::string::npos);

  CHECK(cli({"verify", "--suite", "nonsense"}).code == kExitUsage);
}

TEST_CASE("verify catches an injected eigensolver bug") {
  // Inflates the largest eigenvalue by one percent.
  const EigenSolver buggy = [](const Matrix& m) {
    EigDecomposition e = sym_eig(m);
    e.values.front() *= 1.01;
    return e;
  };
  const Result r = cli({"verify", "--suite", "eig", "--trials", "20"}, buggy);
  CHECK(r.code == kExitFailure);
  CHECK(r.out.find("FAIL") != std::string::npos);
  CHECK(r.out.find("first counterexample") != std::string::npos);
  CHECK(r.out.find("[") != std::string::npos);
}
