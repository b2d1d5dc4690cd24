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

#include "specalign/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "specalign/error.hpp"
#include "specalign/random.hpp"

namespace specalign {

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw DimensionError("accuracy: length mismatch");
  if (labels.empty()) return kNoSamples;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

std::vector<double> per_class_accuracy(std::span<const int> predictions,
                                       std::span<const int> labels, int classes) {
  if (predictions.size() != labels.size()) {
    throw DimensionError("per_class_accuracy: length mismatch");
  }
  std::vector<std::size_t> total(static_cast<std::size_t>(classes), 0);
  std::vector<std::size_t> hit(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) throw KeyError("per_class_accuracy: bad label");
    const auto c = static_cast<std::size_t>(labels[i]);
    ++total[c];
    hit[c] += predictions[i] == labels[i];
  }
  std::vector<double> out(total.size(), kNoSamples);
  for (std::size_t c = 0; c < total.size(); ++c) {
    if (total[c] > 0) out[c] = static_cast<double>(hit[c]) / static_cast<double>(total[c]);
  }
  return out;
}

double macro_accuracy(std::span<const double> per_class) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double a : per_class) {
    if (std::isnan(a)) continue;
    sum += a;
    ++n;
  }
  return n == 0 ? kNoSamples : sum / static_cast<double>(n);
}

double a_distance(const Matrix& fs, const Matrix& ft, std::uint64_t seed) {
  constexpr std::size_t kMinSamples = 20;
  constexpr int kSteps = 200;
  constexpr double kStep = 0.5;
  if (fs.rows() < kMinSamples || ft.rows() < kMinSamples) {
    throw CapacityError("a_distance: need at least 20 samples per domain");
  }
  if (fs.cols() != ft.cols()) throw DimensionError("a_distance: feature widths differ");
  const std::size_t d = fs.cols();
  const std::size_t n = fs.rows() + ft.rows();

  // Standardise on the pooled features.
  std::vector<double> mean(d, 0.0), stddev(d, 0.0);
  auto each_row = [&](auto&& fn) {
    for (std::size_t i = 0; i < fs.rows(); ++i) fn(fs.row_span(i));
    for (std::size_t i = 0; i < ft.rows(); ++i) fn(ft.row_span(i));
  };
  each_row([&](std::span<const double> r) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += r[k];
  });
  for (double& m : mean) m /= static_cast<double>(n);
  each_row([&](std::span<const double> r) {
    for (std::size_t k = 0; k < d; ++k) stddev[k] += (r[k] - mean[k]) * (r[k] - mean[k]);
  });
  for (double& s : stddev) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < 1e-12) s = 1.0;
  }

  struct Sample {
    std::vector<double> x;
    double y;
  };
  std::vector<Sample> train, holdout;
  Rng rng = derive_rng(seed, 0x70726f62);
  auto split = [&](const Matrix& f, double y) {
    std::vector<std::size_t> order(f.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t r = 0; r < order.size(); ++r) {
      Sample s{std::vector<double>(d), y};
      const auto row = f.row_span(order[r]);
      for (std::size_t k = 0; k < d; ++k) s.x[k] = (row[k] - mean[k]) / stddev[k];
      (r < order.size() / 2 ? train : holdout).push_back(std::move(s));
    }
  };
  split(fs, 1.0);
  split(ft, 0.0);

  std::vector<double> w(d, 0.0), gw(d);
  double b = 0.0;
  const double inv = 1.0 / static_cast<double>(train.size());
  for (int step = 0; step < kSteps; ++step) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (const Sample& s : train) {
      const double z = std::inner_product(w.begin(), w.end(), s.x.begin(), b);
      const double err = 1.0 / (1.0 + std::exp(-z)) - s.y;
      for (std::size_t k = 0; k < d; ++k) gw[k] += err * s.x[k];
      gb += err;
    }
    for (std::size_t k = 0; k < d; ++k) w[k] -= kStep * gw[k] * inv;
    b -= kStep * gb * inv;
  }

  std::size_t wrong = 0;
  for (const Sample& s : holdout) {
    const double z = std::inner_product(w.begin(), w.end(), s.x.begin(), b);
    wrong += (z >= 0.0 ? 1.0 : 0.0) != s.y;
  }
  const double eps = static_cast<double>(wrong) / static_cast<double>(holdout.size());
  return std::clamp(2.0 * (1.0 - 2.0 * eps), 0.0, 2.0);
}

}  // namespace specalign
