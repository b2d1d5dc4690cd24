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

// Feature extractor, classifier head, domain discriminator, their losses and
// the SGD optimizer.
//
// The extractor is an MLP of tanh layers ending in a bottleneck; the first
// layers play the role of a backbone and train at the base learning rate,
// while the bottleneck and both heads train at 10x.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "specalign/linalg.hpp"
#include "specalign/random.hpp"
#include "specalign/tape.hpp"

namespace specalign {

struct ModelConfig {
  std::size_t input_dim = 2;
  std::size_t hidden_dim = 64;
  std::size_t hidden_layers = 2;
  std::size_t feature_dim = 16;
  std::size_t classes = 2;
};

struct Dense {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
  bool backbone = false;

  friend bool operator==(const Dense&, const Dense&) = default;
};

struct MlpParams {
  std::vector<Dense> extractor;
  Dense classifier;
  Dense discriminator;

  ModelConfig config() const;
  /// Weight and bias tensors in a fixed order: extractor layers, classifier,
  /// discriminator.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
  std::vector<std::string> tensor_names() const;
  /// Per-tensor flag: true for backbone tensors.
  std::vector<bool> backbone_mask() const;
  bool all_finite() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Uniform Glorot initialisation for weights, zero biases.
MlpParams init_params(const ModelConfig& config, Rng& rng);
/// Every weight and bias zero.
MlpParams zero_params(const ModelConfig& config);

/// Parameters registered as leaves on a tape, same order as MlpParams::tensors().
struct BoundParams {
  std::vector<Var> tensors;
  std::size_t extractor_layers = 0;
};

BoundParams bind(Tape& tape, const MlpParams& params, bool requires_grad = true);

struct ForwardVars {
  Var features;
  Var logits;
  Var probabilities;
};

ForwardVars forward(const BoundParams& params, Var inputs);
/// Domain logit (n x 1) for a feature node.
Var discriminate(const BoundParams& params, Var features);

struct ForwardOutput {
  Matrix features;
  Matrix probabilities;
  Matrix domain_logits;
};

/// Gradient-free forward pass.
ForwardOutput forward(const MlpParams& params, const Matrix& inputs);

/// Cross-entropy against smoothed targets: 1 - eps on the label, eps/(C-1)
/// elsewhere; averaged over rows.
Var cls_loss(Var probabilities, std::span<const int> labels, double smoothing);
double cls_loss(const Matrix& probabilities, std::span<const int> labels, double smoothing);

/// Binary cross-entropy with source = 1, target = 0, averaged over all
/// n_s + n_t logits. Any gradient reversal sits upstream of the logits.
Var adv_loss(Var source_logits, Var target_logits);

/// 2 / (1 + exp(-10 progress)) - 1.
double grl_lambda(double progress);

struct SgdConfig {
  double lr0 = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.005;
  double new_layer_multiplier = 10.0;
};

struct OptimizerState {
  std::vector<Matrix> velocity;
  std::size_t step = 0;
};

OptimizerState init_optimizer(const MlpParams& params);

/// lr0 * (1 + 10 progress)^-0.75.
double lr_schedule(double lr0, double progress);

/// v <- momentum v + g + wd p;  p <- p - lr v. Throws NumericalError and
/// leaves params and state untouched when any gradient is non-finite.
void sgd_step(MlpParams& params, std::span<const Matrix> grads, OptimizerState& state,
              const SgdConfig& config, double progress);

/// Versioned binary checkpoint of shape-tagged tensors.
void save_checkpoint(const std::filesystem::path& path, const MlpParams& params);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace specalign
