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

#include "specalign/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "specalign/error.hpp"
#include "specalign/metrics.hpp"

namespace specalign {

TrainMode parse_mode(const std::string& name) {
  if (name == "source_only") return TrainMode::source_only;
  if (name == "baseline") return TrainMode::baseline;
  if (name == "spa") return TrainMode::spa;
  if (name == "spa_plus_plus") return TrainMode::spa_plus_plus;
  throw ParameterError("unknown mode '" + name + "'");
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::source_only: return "source_only";
    case TrainMode::baseline: return "baseline";
    case TrainMode::spa: return "spa";
    case TrainMode::spa_plus_plus: return "spa_plus_plus";
  }
  return "?";
}

void validate(const TrainConfig& c) {
  if (!(c.alpha >= 0.0) || !(c.beta_max >= 0.0)) {
    throw ParameterError("TrainConfig: alpha and beta_max must be >= 0");
  }
  if (!(c.conf_threshold >= 0.0 && c.conf_threshold <= 1.0)) {
    throw ParameterError("TrainConfig: conf_threshold must lie in [0, 1]");
  }
  if (c.batch_size < 2) throw ParameterError("TrainConfig: batch_size must be >= 2");
  if (c.k < 1 || c.k >= c.batch_size) {
    throw ParameterError("TrainConfig: k must lie in [1, batch_size)");
  }
  if (!(c.tau > 0.0)) throw ParameterError("TrainConfig: tau must be > 0");
  if (!(c.xi >= 0.0 && c.xi < 1.0)) throw ParameterError("TrainConfig: xi must lie in [0, 1)");
  if (!(c.p_norm >= 1.0)) throw ParameterError("TrainConfig: p_norm must be >= 1");
  if (!(c.lr0 > 0.0)) throw ParameterError("TrainConfig: lr0 must be > 0");
  if (!(c.head_lr_multiplier > 0.0)) {
    throw ParameterError("TrainConfig: head_lr_multiplier must be > 0");
  }
  if (!(c.label_smoothing >= 0.0 && c.label_smoothing < 1.0)) {
    throw ParameterError("TrainConfig: label_smoothing must lie in [0, 1)");
  }
  if (!(c.ramp_v >= 0.0) || !(c.ramp_T >= 0.0)) {
    throw ParameterError("TrainConfig: ramp parameters must be >= 0");
  }
  validate(c.augment);
}

double beta_schedule(double t, double total, double beta_max) {
  return ramp(t, total, beta_max);
}

namespace {

bool adapts(const TrainConfig& c) {
  return c.mode == TrainMode::spa || c.mode == TrainMode::spa_plus_plus;
}

bool uses_bank(const TrainConfig& c) { return adapts(c) && c.beta_max > 0.0; }

SgdConfig sgd_config(const TrainConfig& c) {
  SgdConfig s;
  s.lr0 = c.lr0;
  s.momentum = c.momentum;
  s.weight_decay = c.weight_decay;
  s.new_layer_multiplier = c.head_lr_multiplier;
  return s;
}

StepRecord reject(TrainState& state, StepRecord rec) {
  rec.rejected = true;
  ++state.step;
  if (++state.consecutive_rejections >= 3) {
    throw NumericalError("training aborted after 3 consecutive non-finite steps");
  }
  return rec;
}

}  // namespace

TrainState init_state(const TrainConfig& config, const Dataset& labeled,
                      const Dataset& target_pool, std::size_t total_steps) {
  ModelConfig mc;
  mc.input_dim = labeled.dim();
  mc.hidden_dim = config.hidden_dim;
  mc.hidden_layers = config.hidden_layers;
  mc.feature_dim = config.feature_dim;
  mc.classes = static_cast<std::size_t>(labeled.classes);

  Rng init_rng = derive_rng(config.seed, 1);
  TrainState state{init_params(mc, init_rng), {}, std::nullopt, derive_rng(config.seed, 2)};
  state.optimizer = init_optimizer(state.params);
  state.total_steps = total_steps;
  if (uses_bank(config)) {
    BankOptions bo;
    bo.tau = config.tau;
    bo.xi = config.xi;
    state.bank.emplace(target_pool.size(), mc.classes, mc.feature_dim, bo);
    const ForwardOutput out = forward(state.params, target_pool.features);
    state.bank->initialize(out.probabilities, out.features);
  }
  return state;
}

StepRecord train_step(TrainState& state, const TrainConfig& config, const Batch& source,
                      const Batch& target, const Batch& labeled_target,
                      const TrainerHooks& hooks) {
  if (source.inputs.rows() != target.inputs.rows()) {
    throw DimensionError("train_step: source and target batches differ in size");
  }
  if (uses_bank(config) && !state.bank) throw Error("train_step: memory bank not initialised");

  StepRecord rec;
  rec.step = state.step;
  const double total_steps = static_cast<double>(std::max<std::size_t>(state.total_steps, 1));
  const double t = static_cast<double>(state.step);
  const double horizon = config.ramp_T > 0.0 ? config.ramp_T : total_steps;
  const double progress = std::min(t / total_steps, 1.0);
  const bool plus = config.mode == TrainMode::spa_plus_plus;
  rec.alpha = adapts(config) ? config.alpha : 0.0;
  rec.beta = uses_bank(config) ? beta_schedule(t, horizon, config.beta_max) : 0.0;

  Tape tape;
  const BoundParams bp = bind(tape, state.params);
  const ForwardVars fs = forward(bp, tape.constant(source.inputs));
  const ForwardVars ft = forward(bp, tape.constant(target.inputs));

  Var cls;
  if (labeled_target.inputs.rows() > 0) {
    const ForwardVars fl = forward(bp, tape.constant(labeled_target.inputs));
    std::vector<int> labels = source.labels;
    labels.insert(labels.end(), labeled_target.labels.begin(), labeled_target.labels.end());
    cls = cls_loss(ad::concat_rows(fs.probabilities, fl.probabilities), labels,
                   config.label_smoothing);
  } else {
    cls = cls_loss(fs.probabilities, source.labels, config.label_smoothing);
  }

  Var total = cls;
  if (config.mode != TrainMode::source_only) {
    const double lambda = grl_lambda(progress);
    const Var adv = adv_loss(discriminate(bp, ad::gradient_reversal(fs.features, lambda)),
                             discriminate(bp, ad::gradient_reversal(ft.features, lambda)));
    rec.adv = adv.scalar();
    total = ad::add(total, adv);
  }

  ForwardVars fa;
  if (plus) {
    fa = forward(bp, tape.constant(augment(target.inputs, config.augment, state.rng)));
  }

  if (rec.alpha > 0.0) {
    AlignmentOptions opts;
    opts.graph.similarity = config.similarity;
    opts.graph.laplacian = config.laplacian;
    opts.graph.k = config.k;
    opts.graph.sparsify = config.sparsify;
    opts.p = config.p_norm;
    opts.detach_source = config.detach_source;
    try {
      const Var gsa = plus ? hooks.gsa_plus(fs.features, ft.features, fa.features, opts)
                           : hooks.gsa(fs.features, ft.features, opts);
      rec.gsa = gsa.scalar();
      total = ad::add(total, ad::scale(gsa, rec.alpha));
    } catch (const DegenerateInputError&) {
      // A batch graph with an isolated vertex has no normalised spectrum.
      rec.graph_skipped = true;
    }
  }

  if (uses_bank(config)) {
    const PropagationResult prop =
        hooks.propagate(*state.bank, ft.features.value(), ft.probabilities.value(), config.k,
                        target.indices);
    const Var nap = plus ? nap_plus_loss(ft.probabilities, fa.probabilities, prop,
                                         config.conf_threshold, config.nap_average)
                         : nap_loss(ft.probabilities, prop);
    rec.nap = nap.scalar();
    total = ad::add(total, ad::scale(nap, rec.beta));
  }

  if (plus) {
    const Var con = consistency_loss(ft.probabilities, fa.probabilities,
                                     ramp(t, horizon, config.ramp_v));
    rec.con = con.scalar();
    total = ad::add(total, con);
  }

  rec.cls = cls.scalar();
  rec.total = total.scalar();
  if (!std::isfinite(rec.total)) return reject(state, rec);

  tape.backward(total);
  std::vector<Matrix> grads;
  grads.reserve(bp.tensors.size());
  for (const Var& v : bp.tensors) grads.push_back(v.grad());
  try {
    sgd_step(state.params, grads, state.optimizer, sgd_config(config), progress);
  } catch (const NumericalError&) {
    return reject(state, rec);
  }

  if (state.bank) {
    state.bank->update(target.indices, ft.probabilities.value(), ft.features.value());
  }
  state.consecutive_rejections = 0;
  ++state.step;
  return rec;
}

namespace {

constexpr std::size_t kProbeRows = 400;

// Evenly strided rows, at most `limit` of them.
Matrix strided_rows(const Matrix& m, std::size_t limit) {
  if (m.rows() <= limit) return m;
  Matrix out(limit, m.cols());
  for (std::size_t r = 0; r < limit; ++r) {
    const auto src = m.row_span(r * m.rows() / limit);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  return out;
}

Dataset source_part(const Scenario& s) {
  std::vector<std::size_t> idx(s.labeled.size() - s.labeled_target_count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(s.labeled, idx);
}

Dataset shot_part(const Scenario& s) {
  std::vector<std::size_t> idx(s.labeled_target_count);
  std::iota(idx.begin(), idx.end(), s.labeled.size() - s.labeled_target_count);
  return subset(s.labeled, idx);
}

Matrix gather(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = m.row_span(rows[r]);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  return out;
}

}  // namespace

EpochRecord evaluate(const MlpParams& params, const Scenario& scenario,
                     const TrainConfig& config) {
  EpochRecord rec;
  const ForwardOutput target = forward(params, scenario.eval.features);
  rec.acc_target = accuracy(row_argmax(target.probabilities), scenario.eval.labels);

  const Dataset source = source_part(scenario);
  const ForwardOutput src = forward(params, source.features);
  const std::vector<int> pred = row_argmax(src.probabilities);
  rec.acc_source = accuracy(pred, source.labels);
  std::map<int, std::pair<std::size_t, std::size_t>> by_domain;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto& [hit, total] = by_domain[source.domains[i]];
    hit += pred[i] == source.labels[i];
    ++total;
  }
  for (const auto& [domain, counts] : by_domain) {
    rec.acc_source_by_domain[domain] =
        static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }

  if (config.track_a_distance) {
    const ForwardOutput unl = forward(params, scenario.unlabeled.features);
    rec.a_distance = a_distance(strided_rows(src.features, kProbeRows),
                                strided_rows(unl.features, kProbeRows), config.seed);
  }
  return rec;
}

TrainReport run(const TrainConfig& config, const Scenario& scenario, const TrainerHooks& hooks) {
  validate(config);
  const Dataset source = source_part(scenario);
  const Dataset shots = shot_part(scenario);
  const Dataset& target = scenario.unlabeled;
  const std::size_t b = config.batch_size;
  if (source.size() < b || target.size() < b) {
    throw CapacityError("run: source and target pools need at least batch_size samples");
  }
  const std::size_t steps_per_epoch = target.size() / b;
  const std::size_t total_steps = steps_per_epoch * config.epochs;

  TrainState state = init_state(config, scenario.labeled, target, total_steps);
  TrainReport report;
  report.epochs.push_back(evaluate(state.params, scenario, config));

  Batch labeled_target;
  labeled_target.inputs = shots.features;
  labeled_target.labels = shots.labels;

  Rng order_rng = derive_rng(config.seed, 3);
  std::vector<std::size_t> source_order(source.size());
  std::iota(source_order.begin(), source_order.end(), std::size_t{0});
  std::shuffle(source_order.begin(), source_order.end(), order_rng);
  std::size_t source_pos = 0;
  std::vector<std::size_t> target_order(target.size());
  std::iota(target_order.begin(), target_order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(target_order.begin(), target_order.end(), order_rng);
    EpochRecord sums;
    std::size_t accepted = 0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      Batch src_batch;
      std::vector<std::size_t> src_idx(b);
      for (std::size_t i = 0; i < b; ++i) {
        if (source_pos == source_order.size()) {
          std::shuffle(source_order.begin(), source_order.end(), order_rng);
          source_pos = 0;
        }
        src_idx[i] = source_order[source_pos++];
      }
      src_batch.inputs = gather(source.features, src_idx);
      for (std::size_t i : src_idx) src_batch.labels.push_back(source.labels[i]);

      Batch tgt_batch;
      tgt_batch.indices.assign(target_order.begin() + static_cast<std::ptrdiff_t>(s * b),
                               target_order.begin() + static_cast<std::ptrdiff_t>((s + 1) * b));
      tgt_batch.inputs = gather(target.features, tgt_batch.indices);

      const StepRecord rec = train_step(state, config, src_batch, tgt_batch, labeled_target, hooks);
      report.steps.push_back(rec);
      if (rec.rejected) {
        ++sums.rejected_steps;
        continue;
      }
      ++accepted;
      sums.skipped_graphs += rec.graph_skipped;
      sums.loss_cls += rec.cls;
      sums.loss_adv += rec.adv;
      sums.loss_gsa += rec.gsa;
      sums.loss_nap += rec.nap;
      sums.loss_con += rec.con;
    }
    if (state.bank) state.bank->recompute_marginal();

    EpochRecord rec = evaluate(state.params, scenario, config);
    rec.epoch = epoch;
    const double denom = accepted > 0 ? static_cast<double>(accepted) : 1.0;
    rec.loss_cls = sums.loss_cls / denom;
    rec.loss_adv = sums.loss_adv / denom;
    rec.loss_gsa = sums.loss_gsa / denom;
    rec.loss_nap = sums.loss_nap / denom;
    rec.loss_con = sums.loss_con / denom;
    rec.rejected_steps = sums.rejected_steps;
    rec.skipped_graphs = sums.skipped_graphs;
    report.epochs.push_back(rec);
  }

  report.final_acc_target = report.epochs.back().acc_target;
  report.final_acc_source = report.epochs.back().acc_source;
  report.params = std::move(state.params);
  return report;
}

}  // namespace specalign
