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

#include "specalign/bank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "json.hpp"
#include "specalign/error.hpp"

namespace specalign {

namespace {

constexpr double kMarginalFloor = 1e-6;

void normalize_in_place(std::vector<double>& v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw DegenerateInputError("normalize: vector has no positive mass");
  }
  for (double& x : v) x /= s;
}

}  // namespace

std::vector<double> sharpen(std::span<const double> p, double tau, bool literal_negative_exponent) {
  if (!(tau > 0.0)) throw ParameterError("sharpen: tau must be positive");
  if (std::all_of(p.begin(), p.end(), [](double x) { return x == 0.0; })) {
    throw DegenerateInputError("sharpen: all-zero probability vector");
  }
  const double exponent = literal_negative_exponent ? -tau : 1.0 / tau;
  // Scale by the max first so large exponents do not underflow everything.
  const double top = *std::max_element(p.begin(), p.end());
  std::vector<double> out(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] < 0.0) throw DegenerateInputError("sharpen: negative probability");
    if (literal_negative_exponent) {
      out[c] = p[c] > 0.0 ? std::pow(p[c], exponent) : 0.0;
    } else {
      out[c] = std::pow(p[c] / top, exponent);
    }
  }
  normalize_in_place(out);
  return out;
}

std::vector<double> class_balance(std::span<const double> p, std::span<const double> marginal) {
  if (p.size() != marginal.size()) {
    throw DimensionError("class_balance: probability and marginal lengths differ");
  }
  std::vector<double> out(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) out[c] = p[c] / std::max(marginal[c], kMarginalFloor);
  normalize_in_place(out);
  return out;
}

MemoryBank::MemoryBank(std::size_t capacity, std::size_t classes, std::size_t feature_dim,
                       BankOptions options)
    : capacity_(capacity),
      classes_(classes),
      dim_(feature_dim),
      options_(options),
      probs_(capacity * classes, 0.0),
      features_(capacity * feature_dim, 0.0),
      norms_(capacity, 0.0),
      populated_(capacity, 0),
      marginal_(classes, classes == 0 ? 0.0 : 1.0 / static_cast<double>(classes)) {
  if (classes < 1) throw ParameterError("MemoryBank: need at least one class");
  if (!(options.tau > 0.0)) throw ParameterError("MemoryBank: tau must be positive");
  if (!(options.xi >= 0.0 && options.xi < 1.0)) {
    throw ParameterError("MemoryBank: xi must lie in [0, 1)");
  }
}

void MemoryBank::check_index(std::size_t index) const {
  if (index >= capacity_) {
    throw KeyError("MemoryBank: index " + std::to_string(index) + " outside capacity " +
                   std::to_string(capacity_));
  }
}

bool MemoryBank::populated(std::size_t index) const {
  check_index(index);
  return populated_[index] != 0;
}

std::span<const double> MemoryBank::probability(std::size_t index) const {
  check_index(index);
  return {probs_.data() + index * classes_, classes_};
}

std::span<const double> MemoryBank::feature(std::size_t index) const {
  check_index(index);
  return {features_.data() + index * dim_, dim_};
}

void MemoryBank::initialize(const Matrix& probabilities, const Matrix& features) {
  if (probabilities.rows() != capacity_ || probabilities.cols() != classes_ ||
      features.rows() != capacity_ || features.cols() != dim_) {
    throw DimensionError("MemoryBank::initialize: expected capacity x C and capacity x d inputs");
  }
  std::vector<std::vector<double>> sharp(capacity_);
  std::vector<double> marginal(classes_, 0.0);
  for (std::size_t i = 0; i < capacity_; ++i) {
    sharp[i] = sharpen(probabilities.row_span(i), options_.tau, options_.literal_negative_exponent);
    for (std::size_t c = 0; c < classes_; ++c) marginal[c] += sharp[i][c];
  }
  for (double& m : marginal) m /= static_cast<double>(std::max<std::size_t>(capacity_, 1));
  for (std::size_t i = 0; i < capacity_; ++i) {
    const auto balanced = class_balance(sharp[i], marginal);
    std::copy(balanced.begin(), balanced.end(), probs_.begin() + i * classes_);
    const auto f = features.row_span(i);
    std::copy(f.begin(), f.end(), features_.begin() + i * dim_);
    double s = 0.0;
    for (double v : f) s += v * v;
    norms_[i] = std::sqrt(s);
    populated_[i] = 1;
  }
  populated_count_ = capacity_;
  recompute_marginal();
}

void MemoryBank::ema_update(std::size_t index, std::span<const double> probability,
                            std::span<const double> feature) {
  check_index(index);
  if (probability.size() != classes_ || feature.size() != dim_) {
    throw DimensionError("MemoryBank::ema_update: input length mismatch");
  }
  double* p = probs_.data() + index * classes_;
  double* f = features_.data() + index * dim_;
  std::vector<double> old(p, p + classes_);
  const bool fresh = populated_[index] == 0;
  const double keep = fresh ? 0.0 : options_.xi;

  std::vector<double> blended(classes_);
  for (std::size_t c = 0; c < classes_; ++c) {
    blended[c] = keep * old[c] + (1.0 - keep) * probability[c];
  }
  normalize_in_place(blended);
  std::copy(blended.begin(), blended.end(), p);

  double s = 0.0;
  for (std::size_t j = 0; j < dim_; ++j) {
    f[j] = keep * f[j] + (1.0 - keep) * feature[j];
    s += f[j] * f[j];
  }
  norms_[index] = std::sqrt(s);

  if (fresh) {
    populated_[index] = 1;
    ++populated_count_;
    recompute_marginal();
  } else {
    const double inv = 1.0 / static_cast<double>(populated_count_);
    for (std::size_t c = 0; c < classes_; ++c) marginal_[c] += (blended[c] - old[c]) * inv;
  }
}

void MemoryBank::update(std::span<const std::size_t> indices, const Matrix& probabilities,
                        const Matrix& features) {
  if (indices.size() != probabilities.rows() || indices.size() != features.rows()) {
    throw DimensionError("MemoryBank::update: one row per index required");
  }
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto sharp =
        sharpen(probabilities.row_span(r), options_.tau, options_.literal_negative_exponent);
    const auto refined = class_balance(sharp, marginal_);
    ema_update(indices[r], refined, features.row_span(r));
  }
}

void MemoryBank::recompute_marginal() {
  std::fill(marginal_.begin(), marginal_.end(), 0.0);
  if (populated_count_ == 0) {
    std::fill(marginal_.begin(), marginal_.end(), 1.0 / static_cast<double>(classes_));
    return;
  }
  for (std::size_t i = 0; i < capacity_; ++i) {
    if (!populated_[i]) continue;
    for (std::size_t c = 0; c < classes_; ++c) marginal_[c] += probs_[i * classes_ + c];
  }
  for (double& m : marginal_) m /= static_cast<double>(populated_count_);
}

std::vector<std::size_t> MemoryBank::knn_query(std::span<const double> feature, std::size_t k,
                                               std::optional<std::size_t> exclude) const {
  if (feature.size() != dim_) throw DimensionError("MemoryBank::knn_query: feature length");
  double qn = 0.0;
  for (double v : feature) qn += v * v;
  qn = std::sqrt(qn);
  if (qn == 0.0) throw DegenerateInputError("MemoryBank::knn_query: zero query feature");

  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(populated_count_);
  for (std::size_t i = 0; i < capacity_; ++i) {
    if (!populated_[i] || (exclude && *exclude == i)) continue;
    double dot = 0.0;
    const double* f = features_.data() + i * dim_;
    for (std::size_t j = 0; j < dim_; ++j) dot += f[j] * feature[j];
    const double cos = norms_[i] > 0.0 ? dot / (norms_[i] * qn) : 0.0;
    scored.emplace_back(cos, i);
  }
  if (scored.size() < k || k == 0) {
    throw CapacityError("MemoryBank::knn_query: " + std::to_string(scored.size()) +
                        " candidates for k = " + std::to_string(k));
  }
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [](const auto& a, const auto& b) {
                      return a.first > b.first || (a.first == b.first && a.second < b.second);
                    });
  std::vector<std::size_t> out(k);
  for (std::size_t r = 0; r < k; ++r) out[r] = scored[r].second;
  return out;
}

void MemoryBank::dump_jsonl(std::ostream& out) const {
  for (std::size_t i = 0; i < capacity_; ++i) {
    if (!populated_[i]) continue;
    const auto p = probability(i);
    const auto f = feature(i);
    nlohmann::json rec;
    rec["index"] = i;
    rec["probability"] = std::vector<double>(p.begin(), p.end());
    rec["feature"] = std::vector<double>(f.begin(), f.end());
    out << rec.dump() << '\n';
  }
}

}  // namespace specalign
