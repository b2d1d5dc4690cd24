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

// Training loop: classification + adversarial alignment, plus the spectral
// alignment and neighbour-aware propagation terms.
//
//   total = cls + adv + alpha * gsa + beta(t) * nap [+ con]
//
// spa uses gsa / nap; spa_plus_plus uses gsa++ / nap++ and adds the weighted
// consistency term; baseline keeps only cls + adv; source_only keeps cls.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specalign/augment.hpp"
#include "specalign/bank.hpp"
#include "specalign/data.hpp"
#include "specalign/graph.hpp"
#include "specalign/model.hpp"
#include "specalign/propagate.hpp"
#include "specalign/spectral.hpp"

namespace specalign {

enum class TrainMode { source_only, baseline, spa, spa_plus_plus };

TrainMode parse_mode(const std::string& name);
std::string to_string(TrainMode mode);

struct TrainConfig {
  TrainMode mode = TrainMode::spa;
  double alpha = 1.0;
  double beta_max = 0.2;
  double conf_threshold = 0.8;
  double tau = 0.5;
  double xi = 0.5;
  std::size_t k = 5;
  SimilarityKind similarity = SimilarityKind::gaussian;
  LaplacianKind laplacian = LaplacianKind::sym;
  double p_norm = 2.0;
  bool sparsify = true;
  bool detach_source = true;
  bool nap_average = true;
  double label_smoothing = 0.1;

  double lr0 = 0.03;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Learning-rate factor for the layers after the hidden stack (bottleneck,
  /// classifier, discriminator).
  double head_lr_multiplier = 10.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 40;

  double ramp_v = 0.03;
  /// Ramp horizon in steps; 0 means the total number of training steps.
  double ramp_T = 0.0;
  AugmentPolicy augment;

  std::size_t hidden_dim = 64;
  std::size_t hidden_layers = 2;
  std::size_t feature_dim = 16;

  /// Compute the A-distance at every evaluation.
  bool track_a_distance = true;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

/// beta_max * exp(-5 (1 - t/T)^2).
double beta_schedule(double t, double total, double beta_max);

/// Loss components of one step. `con` already carries its ramp weight.
struct StepRecord {
  std::size_t step = 0;
  double cls = 0.0;
  double adv = 0.0;
  double gsa = 0.0;
  double nap = 0.0;
  double con = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double total = 0.0;
  bool rejected = false;
  /// The spectral term was dropped because a batch graph had an isolated vertex.
  bool graph_skipped = false;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the evaluation before training
  double loss_cls = 0.0;
  double loss_adv = 0.0;
  double loss_gsa = 0.0;
  double loss_nap = 0.0;
  double loss_con = 0.0;
  double acc_source = 0.0;
  double acc_target = 0.0;
  double a_distance = 0.0;
  std::map<int, double> acc_source_by_domain;
  std::size_t rejected_steps = 0;
  std::size_t skipped_graphs = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
  MlpParams params;
  double final_acc_target = 0.0;
  double final_acc_source = 0.0;
};

/// Replaceable loss providers. A disabled term is never called, which lets
/// tests substitute stubs to prove that independence.
struct TrainerHooks {
  std::function<Var(Var, Var, const AlignmentOptions&)> gsa =
      static_cast<Var (*)(Var, Var, const AlignmentOptions&)>(gsa_loss);
  std::function<Var(Var, Var, Var, const AlignmentOptions&)> gsa_plus = gsa_plus_loss;
  std::function<PropagationResult(const MemoryBank&, const Matrix&, const Matrix&, std::size_t,
                                  std::span<const std::size_t>)>
      propagate = neighbor_average;
};

/// Mutable training state between steps.
struct TrainState {
  MlpParams params;
  OptimizerState optimizer;
  std::optional<MemoryBank> bank;
  Rng rng;
  std::size_t step = 0;
  std::size_t total_steps = 0;
  std::size_t consecutive_rejections = 0;
};

/// Builds the model, optimizer and (for spa modes with beta_max > 0) the
/// memory bank, initialised from a full pass over `target_pool`.
TrainState init_state(const TrainConfig& config, const Dataset& labeled,
                      const Dataset& target_pool, std::size_t total_steps);

struct Batch {
  Matrix inputs;
  std::vector<int> labels;            // source batch only
  std::vector<std::size_t> indices;   // target batch: keys into the bank
};

/// One optimiser step. `labeled_target` carries the SSDA shots (may be empty).
/// A non-finite loss or gradient leaves the parameters untouched and returns a
/// rejected record; the third consecutive rejection throws NumericalError.
StepRecord train_step(TrainState& state, const TrainConfig& config, const Batch& source,
                      const Batch& target, const Batch& labeled_target,
                      const TrainerHooks& hooks = {});

/// Full training on a composed scenario. Evaluation (on `scenario.eval`) runs
/// before the first epoch and after each one.
TrainReport run(const TrainConfig& config, const Scenario& scenario,
                const TrainerHooks& hooks = {});

/// Accuracy, per-domain accuracy and A-distance of `params` on a scenario.
EpochRecord evaluate(const MlpParams& params, const Scenario& scenario,
                     const TrainConfig& config);

}  // namespace specalign
