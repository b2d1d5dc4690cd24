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

#include "specalign/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "specalign/error.hpp"

namespace specalign {

namespace {

Dense make_dense(std::size_t in, std::size_t out, bool backbone, Rng* rng) {
  Dense d;
  d.backbone = backbone;
  d.bias = Matrix(1, out);
  if (rng == nullptr) {
    d.weight = Matrix(in, out);
  } else {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    d.weight = random_uniform(in, out, *rng, -limit, limit);
  }
  return d;
}

MlpParams build(const ModelConfig& c, Rng* rng) {
  if (c.classes < 2) throw ParameterError("ModelConfig: need at least 2 classes");
  if (c.input_dim == 0 || c.feature_dim == 0 || c.hidden_dim == 0) {
    throw ParameterError("ModelConfig: zero-width layer");
  }
  MlpParams p;
  std::size_t in = c.input_dim;
  for (std::size_t l = 0; l < c.hidden_layers; ++l) {
    p.extractor.push_back(make_dense(in, c.hidden_dim, true, rng));
    in = c.hidden_dim;
  }
  p.extractor.push_back(make_dense(in, c.feature_dim, false, rng));
  p.classifier = make_dense(c.feature_dim, c.classes, false, rng);
  p.discriminator = make_dense(c.feature_dim, 1, false, rng);
  return p;
}

Var dense(Var x, Var w, Var b) { return ad::add_row(ad::matmul(x, w), b); }

}  // namespace

ModelConfig MlpParams::config() const {
  ModelConfig c;
  c.input_dim = extractor.front().weight.rows();
  c.hidden_layers = extractor.size() - 1;
  c.hidden_dim = c.hidden_layers > 0 ? extractor.front().weight.cols() : 0;
  c.feature_dim = extractor.back().weight.cols();
  c.classes = classifier.weight.cols();
  return c;
}

std::vector<Matrix*> MlpParams::tensors() {
  std::vector<Matrix*> out;
  for (Dense& d : extractor) {
    out.push_back(&d.weight);
    out.push_back(&d.bias);
  }
  for (Dense* d : {&classifier, &discriminator}) {
    out.push_back(&d->weight);
    out.push_back(&d->bias);
  }
  return out;
}

std::vector<const Matrix*> MlpParams::tensors() const {
  std::vector<const Matrix*> out;
  for (Matrix* m : const_cast<MlpParams*>(this)->tensors()) out.push_back(m);
  return out;
}

std::vector<std::string> MlpParams::tensor_names() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < extractor.size(); ++l) {
    out.push_back("extractor." + std::to_string(l) + ".weight");
    out.push_back("extractor." + std::to_string(l) + ".bias");
  }
  for (const char* head : {"classifier", "discriminator"}) {
    out.push_back(std::string(head) + ".weight");
    out.push_back(std::string(head) + ".bias");
  }
  return out;
}

std::vector<bool> MlpParams::backbone_mask() const {
  std::vector<bool> out;
  for (const Dense& d : extractor) out.insert(out.end(), 2, d.backbone);
  out.insert(out.end(), 4, false);
  return out;
}

bool MlpParams::all_finite() const {
  for (const Matrix* m : tensors())
    if (!m->all_finite()) return false;
  return true;
}

MlpParams init_params(const ModelConfig& config, Rng& rng) { return build(config, &rng); }

MlpParams zero_params(const ModelConfig& config) { return build(config, nullptr); }

BoundParams bind(Tape& tape, const MlpParams& params, bool requires_grad) {
  BoundParams out;
  out.extractor_layers = params.extractor.size();
  for (const Matrix* m : params.tensors()) out.tensors.push_back(tape.leaf(*m, requires_grad));
  return out;
}

ForwardVars forward(const BoundParams& p, Var inputs) {
  const std::size_t expected = p.tensors.front().rows();
  if (inputs.cols() != expected) {
    throw DimensionError("forward: input has " + std::to_string(inputs.cols()) +
                         " columns, model expects " + std::to_string(expected));
  }
  Var h = inputs;
  for (std::size_t l = 0; l < p.extractor_layers; ++l) {
    h = ad::tanh(dense(h, p.tensors[2 * l], p.tensors[2 * l + 1]));
  }
  const std::size_t c = 2 * p.extractor_layers;
  ForwardVars out;
  out.features = h;
  out.logits = dense(h, p.tensors[c], p.tensors[c + 1]);
  out.probabilities = ad::softmax_rows(out.logits);
  return out;
}

Var discriminate(const BoundParams& p, Var features) {
  const std::size_t d = 2 * p.extractor_layers + 2;
  return dense(features, p.tensors[d], p.tensors[d + 1]);
}

ForwardOutput forward(const MlpParams& params, const Matrix& inputs) {
  Tape tape;
  const BoundParams bound = bind(tape, params, false);
  const ForwardVars vars = forward(bound, tape.constant(inputs));
  ForwardOutput out;
  out.features = vars.features.value();
  out.probabilities = vars.probabilities.value();
  out.domain_logits = discriminate(bound, vars.features).value();
  return out;
}

namespace {

Matrix smoothed_targets(std::size_t rows, std::size_t classes, std::span<const int> labels,
                        double eps) {
  if (labels.size() != rows) throw DimensionError("cls_loss: one label per row required");
  if (!(eps >= 0.0 && eps < 1.0)) throw ParameterError("cls_loss: smoothing must lie in [0, 1)");
  const double off = classes > 1 ? eps / static_cast<double>(classes - 1) : 0.0;
  Matrix t(rows, classes, off);
  for (std::size_t i = 0; i < rows; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ParameterError("cls_loss: label outside [0, C)");
    }
    t(i, static_cast<std::size_t>(labels[i])) = 1.0 - eps;
  }
  return t;
}

}  // namespace

Var cls_loss(Var probabilities, std::span<const int> labels, double smoothing) {
  const Matrix targets =
      smoothed_targets(probabilities.rows(), probabilities.cols(), labels, smoothing);
  Tape& tape = probabilities.tape();
  const Var ll = ad::mul(ad::log(probabilities, 1e-12), tape.constant(targets));
  return ad::scale(ad::sum(ll), -1.0 / static_cast<double>(probabilities.rows()));
}

double cls_loss(const Matrix& probabilities, std::span<const int> labels, double smoothing) {
  const Matrix targets =
      smoothed_targets(probabilities.rows(), probabilities.cols(), labels, smoothing);
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (targets[i] != 0.0) acc += targets[i] * std::log(std::max(probabilities[i], 1e-12));
  }
  return -acc / static_cast<double>(probabilities.rows());
}

Var adv_loss(Var source_logits, Var target_logits) {
  if (source_logits.cols() != 1 || target_logits.cols() != 1) {
    throw DimensionError("adv_loss: logits must be n x 1");
  }
  // -log sigmoid(z) = softplus(-z);  -log(1 - sigmoid(z)) = softplus(z).
  const Var src = ad::sum(ad::softplus(ad::scale(source_logits, -1.0)));
  const Var tgt = ad::sum(ad::softplus(target_logits));
  const double n = static_cast<double>(source_logits.rows() + target_logits.rows());
  return ad::scale(ad::add(src, tgt), 1.0 / n);
}

double grl_lambda(double progress) { return 2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0; }

OptimizerState init_optimizer(const MlpParams& params) {
  OptimizerState s;
  for (const Matrix* m : params.tensors()) s.velocity.emplace_back(m->rows(), m->cols());
  return s;
}

double lr_schedule(double lr0, double progress) {
  return lr0 * std::pow(1.0 + 10.0 * progress, -0.75);
}

void sgd_step(MlpParams& params, std::span<const Matrix> grads, OptimizerState& state,
              const SgdConfig& config, double progress) {
  auto tensors = params.tensors();
  if (grads.size() != tensors.size() || state.velocity.size() != tensors.size()) {
    throw DimensionError("sgd_step: gradient count does not match parameters");
  }
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    if (!grads[t].same_shape(*tensors[t]) || !state.velocity[t].same_shape(*tensors[t])) {
      throw DimensionError("sgd_step: gradient shape mismatch for tensor " + std::to_string(t));
    }
    if (!grads[t].all_finite()) {
      throw NumericalError("sgd_step: non-finite gradient in tensor " + std::to_string(t));
    }
  }
  const auto backbone = params.backbone_mask();
  const double base = lr_schedule(config.lr0, progress);
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const double lr = backbone[t] ? base : base * config.new_layer_multiplier;
    Matrix& p = *tensors[t];
    Matrix& v = state.velocity[t];
    const Matrix& g = grads[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = config.momentum * v[i] + g[i] + config.weight_decay * p[i];
      p[i] -= lr * v[i];
    }
  }
  ++state.step;
}

namespace {

constexpr char kMagic[8] = {'S', 'P', 'A', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("checkpoint: truncated file", 0);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_checkpoint: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  const auto tensors = params.tensors();
  const auto names = params.tensor_names();
  const auto backbone = params.backbone_mask();
  write_pod(out, static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    write_pod(out, static_cast<std::uint32_t>(names[t].size()));
    out.write(names[t].data(), static_cast<std::streamsize>(names[t].size()));
    write_pod(out, static_cast<std::uint8_t>(backbone[t] ? 1 : 0));
    write_pod(out, static_cast<std::uint64_t>(tensors[t]->rows()));
    write_pod(out, static_cast<std::uint64_t>(tensors[t]->cols()));
    out.write(reinterpret_cast<const char*>(tensors[t]->data().data()),
              static_cast<std::streamsize>(tensors[t]->size() * sizeof(double)));
  }
  if (!out) throw Error("save_checkpoint: write failed for " + path.string());
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw SchemaError("load_checkpoint: bad magic in " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw SchemaError("load_checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = read_pod<std::uint32_t>(in);
  if (count < 6 || count % 2 != 0) throw SchemaError("load_checkpoint: bad tensor count");

  struct Loaded {
    std::string name;
    bool backbone;
    Matrix value;
  };
  std::vector<Loaded> loaded;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const bool backbone = read_pod<std::uint8_t>(in) != 0;
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    std::vector<double> data(rows * cols);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw ParseError("checkpoint: truncated tensor " + name, 0);
    loaded.push_back({std::move(name), backbone, Matrix(rows, cols, std::move(data))});
  }

  MlpParams p;
  const std::size_t layers = (count - 4) / 2;
  auto take = [&](std::size_t idx) {
    Dense d;
    d.weight = std::move(loaded[idx].value);
    d.bias = std::move(loaded[idx + 1].value);
    d.backbone = loaded[idx].backbone;
    return d;
  };
  for (std::size_t l = 0; l < layers; ++l) p.extractor.push_back(take(2 * l));
  p.classifier = take(2 * layers);
  p.discriminator = take(2 * layers + 2);
  const auto names = p.tensor_names();
  for (std::size_t t = 0; t < names.size(); ++t) {
    if (names[t] != loaded[t].name) {
      throw SchemaError("load_checkpoint: unexpected tensor '" + loaded[t].name + "'");
    }
  }
  return p;
}

}  // namespace specalign
