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

// Experiment runner behind the `specalign` executable.
//
//   specalign run --scenario uda --dataset two_moons --rotation 45 --out runs/a
//   specalign verify --suite spectral --trials 500
//
// Configuration precedence: built-in defaults < --config file < flags. The
// seed falls back to $SPA_SEED when neither the file nor a flag sets it.

#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "specalign/data.hpp"
#include "specalign/trainer.hpp"
#include "specalign/verify.hpp"

namespace specalign {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct ExperimentConfig {
  ScenarioKind scenario = ScenarioKind::uda;
  int shots = 0;
  std::size_t sources = 2;  // msda only
  std::size_t targets = 2;  // mtda only
  std::string dataset = "two_moons";
  std::size_t samples = 1000;  // per domain
  double rotation = 45.0;
  double noise = 0.1;
  int classes = 3;  // blobs
  double shift_x = 5.0;
  double shift_y = 0.0;
  double spread = 0.5;
  /// Extra sources sit this fraction further along the shift; extra targets
  /// this fraction closer.
  double domain_step = 0.25;
  double imbalance = 1.0;
  bool subpop_balance = false;
  std::string source_csv;  // comma-separated paths
  std::string target_csv;
  TrainConfig train;
};

/// Sets one `key = value` setting. Throws ParameterError for an unknown key or
/// an unparsable value.
void set_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Every setting as (key, value), in a fixed order; reals use %.17g.
std::vector<std::pair<std::string, std::string>> settings(const ExperimentConfig& config);

/// Flat `key = value` text; `#` starts a comment. Returns the keys set.
std::vector<std::string> read_config(const std::filesystem::path& path,
                                     ExperimentConfig& config);
void write_config(const std::filesystem::path& path, const ExperimentConfig& config);

/// Per-domain datasets: sources first, then targets.
std::vector<Dataset> build_domains(const ExperimentConfig& config);
ScenarioSpec build_spec(const ExperimentConfig& config, std::size_t domain_count);

/// One JSON line per epoch record.
std::string epoch_json(const EpochRecord& record);

/// Builds the domains and composes the scenario.
Scenario prepare_scenario(const ExperimentConfig& config);

/// Trains on `scenario` and writes metrics.jsonl, curve.csv, resolved.cfg,
/// checkpoint.bin and summary.json under `out_dir`.
TrainReport run_experiment(const ExperimentConfig& config, const Scenario& scenario,
                           const std::filesystem::path& out_dir);

/// Entry point for `specalign <run|verify> ...`; returns the process exit code.
/// `solver` is handed to the verify suites.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               const EigenSolver& solver = sym_eig);

}  // namespace specalign
