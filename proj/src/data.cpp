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

#include "specalign/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "specalign/error.hpp"
#include "specalign/random.hpp"

namespace specalign {

void validate(const Dataset& data) {
  if (data.labels.size() != data.size() || data.domains.size() != data.size()) {
    throw DimensionError("Dataset: labels/domains must have one entry per sample");
  }
  for (int y : data.labels) {
    if (y == kHiddenLabel) continue;
    if (y < 0 || y >= data.classes) {
      throw SchemaError("Dataset: label " + std::to_string(y) + " outside [0, " +
                        std::to_string(data.classes) + ")");
    }
  }
  if (!data.features.all_finite()) throw SchemaError("Dataset: non-finite feature");
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.classes = data.classes;
  out.split = data.split;
  out.features = Matrix(indices.size(), data.dim());
  out.labels.reserve(indices.size());
  out.domains.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (i >= data.size()) throw KeyError("subset: index out of range");
    const auto src = data.features.row_span(i);
    std::copy(src.begin(), src.end(), out.features.row_span(r).begin());
    out.labels.push_back(data.labels[i]);
    out.domains.push_back(data.domains[i]);
  }
  return out;
}

Dataset concat(const std::vector<Dataset>& parts) {
  if (parts.empty()) return {};
  Dataset out;
  out.classes = parts.front().classes;
  out.split = parts.front().split;
  std::size_t rows = 0;
  for (const Dataset& p : parts) {
    if (p.classes != out.classes) throw SchemaError("concat: class counts differ");
    if (p.size() > 0 && p.dim() != parts.front().dim()) {
      throw DimensionError("concat: feature dimensions differ");
    }
    rows += p.size();
  }
  std::vector<double> data;
  data.reserve(rows * parts.front().dim());
  for (const Dataset& p : parts) {
    data.insert(data.end(), p.features.data().begin(), p.features.data().end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.domains.insert(out.domains.end(), p.domains.begin(), p.domains.end());
  }
  out.features = Matrix(rows, parts.front().dim(), std::move(data));
  return out;
}

std::vector<std::size_t> class_counts(const Dataset& data) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(data.classes), 0);
  for (int y : data.labels)
    if (y >= 0) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

namespace {

std::array<double, 2> rotate(double x, double y, double degrees) {
  // Reducing first keeps whole turns exact.
  const double r = std::fmod(degrees, 360.0) * std::numbers::pi / 180.0;
  return {std::cos(r) * x - std::sin(r) * y, std::sin(r) * x + std::cos(r) * y};
}

}  // namespace

Dataset make_two_moons(std::size_t n, double rotation_degrees, double noise, std::uint64_t seed,
                       int domain) {
  if (n % 2 != 0) throw ParameterError("make_two_moons: n must be even");
  if (!(noise >= 0.0)) throw ParameterError("make_two_moons: noise must be >= 0");
  Rng rng = derive_rng(seed, 0x6d6f6f6e);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> jitter(0.0, noise > 0.0 ? noise : 1.0);

  Dataset out;
  out.classes = 2;
  out.features = Matrix(n, 2);
  out.labels.resize(n);
  out.domains.assign(n, domain);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = angle(rng);
    double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
    if (noise > 0.0) {
      x += jitter(rng);
      y += jitter(rng);
    }
    const auto r = rotate(x, y, rotation_degrees);
    out.features(i, 0) = r[0];
    out.features(i, 1) = r[1];
    out.labels[i] = label;
  }
  return out;
}

std::array<std::array<double, 2>, 2> moon_class_means(double rotation_degrees) {
  // Mean of (cos t, sin t) over t ~ U(0, pi) is (0, 2/pi).
  const double m = 2.0 / std::numbers::pi;
  const auto upper = rotate(0.0, m, rotation_degrees);
  const auto lower = rotate(1.0, 0.5 - m, rotation_degrees);
  return {upper, lower};
}

std::pair<Dataset, Dataset> make_blob_shift(std::size_t n, int classes,
                                            std::span<const double> shift, double spread,
                                            std::uint64_t seed) {
  if (classes < 2) throw ParameterError("make_blob_shift: need at least 2 classes");
  if (shift.size() < 2) throw ParameterError("make_blob_shift: need at least 2 dimensions");
  if (!(spread >= 0.0)) throw ParameterError("make_blob_shift: spread must be >= 0");
  const std::size_t d = shift.size();
  Matrix centers(static_cast<std::size_t>(classes), d);
  for (int c = 0; c < classes; ++c) {
    const double a = 2.0 * std::numbers::pi * c / classes;
    centers(static_cast<std::size_t>(c), 0) = 3.0 * std::cos(a);
    centers(static_cast<std::size_t>(c), 1) = 3.0 * std::sin(a);
  }
  auto draw = [&](Rng& rng, bool shifted, int domain) {
    std::normal_distribution<double> noise(0.0, spread > 0.0 ? spread : 1.0);
    Dataset ds;
    ds.classes = classes;
    ds.features = Matrix(n, d);
    ds.labels.resize(n);
    ds.domains.assign(n, domain);
    for (std::size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
      for (std::size_t k = 0; k < d; ++k) {
        double v = centers(static_cast<std::size_t>(label), k) + (shifted ? shift[k] : 0.0);
        if (spread > 0.0) v += noise(rng);
        ds.features(i, k) = v;
      }
      ds.labels[i] = label;
    }
    return ds;
  };
  Rng src_rng = derive_rng(seed, 0x626c6f62);
  Rng tgt_rng = derive_rng(seed, 0x626c6f63);
  Dataset source = draw(src_rng, false, 0);
  Dataset target = draw(tgt_rng, true, 1);
  return {std::move(source), std::move(target)};
}

Dataset long_tail_resample(const Dataset& data, double ratio, std::uint64_t seed) {
  if (!(ratio >= 1.0)) throw ParameterError("long_tail_resample: ratio must be >= 1");
  const std::size_t classes = static_cast<std::size_t>(data.classes);
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] >= 0) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }
  const double head = static_cast<double>(by_class.front().size());
  Rng rng = derive_rng(seed, 0x7461696c);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < classes; ++c) {
    const double frac = classes > 1 ? static_cast<double>(c) / static_cast<double>(classes - 1) : 0;
    const auto want = static_cast<std::size_t>(std::llround(head * std::pow(ratio, -frac)));
    const std::size_t count = std::min(want, by_class[c].size());
    if (count < 1) {
      throw ParameterError("long_tail_resample: class " + std::to_string(c) + " would be empty");
    }
    std::vector<std::size_t> idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  return subset(data, keep);
}

ScenarioKind parse_scenario(const std::string& name) {
  if (name == "uda") return ScenarioKind::uda;
  if (name == "ssda") return ScenarioKind::ssda;
  if (name == "msda") return ScenarioKind::msda;
  if (name == "mtda") return ScenarioKind::mtda;
  throw ParameterError("unknown scenario '" + name + "'");
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::uda: return "uda";
    case ScenarioKind::ssda: return "ssda";
    case ScenarioKind::msda: return "msda";
    case ScenarioKind::mtda: return "mtda";
  }
  return "?";
}

void validate(const ScenarioSpec& spec) {
  if (spec.source_domains.empty() || spec.target_domains.empty()) {
    throw ParameterError("ScenarioSpec: need at least one source and one target domain");
  }
  if (spec.kind == ScenarioKind::ssda && spec.labeled_target_shots < 1) {
    throw ParameterError("ScenarioSpec: ssda requires at least one labeled shot");
  }
  if (spec.kind != ScenarioKind::ssda && spec.labeled_target_shots != 0) {
    throw ParameterError("ScenarioSpec: labeled shots are only valid for ssda");
  }
  if (spec.kind == ScenarioKind::msda && spec.source_domains.size() < 2) {
    throw ParameterError("ScenarioSpec: msda requires at least 2 source domains");
  }
  if (spec.kind == ScenarioKind::mtda && spec.target_domains.size() < 2) {
    throw ParameterError("ScenarioSpec: mtda requires at least 2 target domains");
  }
  if (!(spec.imbalance_ratio >= 1.0)) {
    throw ParameterError("ScenarioSpec: imbalance ratio must be >= 1");
  }
}

namespace {

Dataset balance_subpopulations(const Dataset& data, std::uint64_t seed) {
  std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    groups[{data.domains[i], data.labels[i]}].push_back(i);
  }
  std::size_t smallest = data.size();
  for (const auto& [key, idx] : groups) smallest = std::min(smallest, idx.size());
  Rng rng = derive_rng(seed, 0x73756270);
  std::vector<std::size_t> keep;
  for (auto& [key, idx] : groups) {
    std::shuffle(idx.begin(), idx.end(), rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(smallest));
  }
  std::sort(keep.begin(), keep.end());
  return subset(data, keep);
}

}  // namespace

Scenario compose_scenario(const ScenarioSpec& spec, const std::vector<Dataset>& datasets) {
  validate(spec);
  auto fetch = [&](std::size_t i, std::uint64_t salt) {
    if (i >= datasets.size()) throw KeyError("compose_scenario: unknown domain index");
    Dataset d = datasets[i];
    validate(d);
    if (spec.imbalance_ratio > 1.0) d = long_tail_resample(d, spec.imbalance_ratio, spec.seed + salt);
    return d;
  };

  std::vector<Dataset> sources;
  for (std::size_t s : spec.source_domains) sources.push_back(fetch(s, s));
  std::vector<Dataset> targets;
  for (std::size_t t : spec.target_domains) targets.push_back(fetch(t, t));

  Dataset target = concat(targets);
  std::vector<char> is_shot(target.size(), 0);
  if (spec.kind == ScenarioKind::ssda) {
    Rng rng = derive_rng(spec.seed, 0x73686f74);
    std::vector<std::size_t> order(target.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> taken(static_cast<std::size_t>(target.classes), 0);
    for (std::size_t i : order) {
      const auto y = static_cast<std::size_t>(target.labels[i]);
      if (taken[y] < spec.labeled_target_shots) {
        ++taken[y];
        is_shot[i] = 1;
      }
    }
    for (int t : taken) {
      if (t < spec.labeled_target_shots) {
        throw CapacityError("compose_scenario: not enough target samples for " +
                            std::to_string(spec.labeled_target_shots) + " shots per class");
      }
    }
  }

  std::vector<std::size_t> shots;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < target.size(); ++i) (is_shot[i] ? shots : rest).push_back(i);

  Scenario out;
  std::vector<Dataset> labeled_parts = sources;
  labeled_parts.push_back(subset(target, shots));
  out.labeled = concat(labeled_parts);
  out.labeled_target_count = shots.size();

  out.eval = subset(target, rest);
  out.eval.split = Split::test;
  if (spec.subpopulation_balance) out.eval = balance_subpopulations(out.eval, spec.seed);

  out.unlabeled = subset(target, rest);
  std::fill(out.unlabeled.labels.begin(), out.unlabeled.labels.end(), kHiddenLabel);
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && s[b] == ' ') ++b;
  return s.substr(b);
}

template <class T>
T parse_number(const std::string& cell, std::size_t line, const char* what) {
  T v{};
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || cell.empty()) {
    throw ParseError(std::string("load_csv: bad ") + what + " '" + cell + "'", line);
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("load_csv: empty file " + path.string());
  const auto header = split_csv(trim(line));
  if (header.size() < 3 || trim(header[header.size() - 2]) != "label" ||
      trim(header.back()) != "domain") {
    throw SchemaError("load_csv: header must be f0,...,f{d-1},label,domain");
  }
  const std::size_t d = header.size() - 2;
  for (std::size_t k = 0; k < d; ++k) {
    if (trim(header[k]) != "f" + std::to_string(k)) {
      throw SchemaError("load_csv: expected column f" + std::to_string(k) + ", found '" +
                        header[k] + "'");
    }
  }

  std::vector<double> values;
  Dataset out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != d + 2) {
      throw SchemaError("load_csv: line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(d + 2));
    }
    for (std::size_t k = 0; k < d; ++k) values.push_back(parse_number<double>(trim(cells[k]), line_no, "feature"));
    const int label = parse_number<int>(trim(cells[d]), line_no, "label");
    const int domain = parse_number<int>(trim(cells[d + 1]), line_no, "domain");
    if (label < 0 || domain < 0) throw ParseError("load_csv: negative label or domain", line_no);
    out.labels.push_back(label);
    out.domains.push_back(domain);
  }
  out.features = Matrix(out.labels.size(), d, std::move(values));
  int max_label = -1;
  for (int y : out.labels) max_label = std::max(max_label, y);
  out.classes = max_label + 1;
  validate(out);
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  validate(data);
  std::ofstream out(path);
  if (!out) throw Error("write_csv: cannot open " + path.string());
  for (std::size_t k = 0; k < data.dim(); ++k) out << 'f' << k << ',';
  out << "label,domain\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < data.dim(); ++k) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), data.features(i, k));
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << data.labels[i] << ',' << data.domains[i] << '\n';
  }
}

}  // namespace specalign
