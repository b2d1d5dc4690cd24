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

#include "specalign/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "specalign/error.hpp"

namespace specalign {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size() ||
      !std::isfinite(out)) {
    throw ParameterError(key + ": expected a real number, got '" + v + "'");
  }
  return out;
}

template <class T>
T to_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ParameterError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParameterError(key + ": expected true or false, got '" + v + "'");
}

struct Setting {
  const char* key;
  const char* help;
  bool is_flag;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define REAL(name, field, help)                                                              \
  Setting {                                                                                  \
    name, help, false,                                                                       \
        [](ExperimentConfig& c, const std::string& v) { c.field = to_double(name, v); },     \
        [](const ExperimentConfig& c) { return fmt(c.field); }                               \
  }
#define SIZE(name, field, help)                                                              \
  Setting {                                                                                  \
    name, help, false,                                                                       \
        [](ExperimentConfig& c, const std::string& v) {                                      \
          c.field = to_integer<std::size_t>(name, v);                                        \
        },                                                                                   \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                    \
  }
#define INT(name, field, help)                                                               \
  Setting {                                                                                  \
    name, help, false,                                                                       \
        [](ExperimentConfig& c, const std::string& v) { c.field = to_integer<int>(name, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                    \
  }
#define BOOL(name, field, help)                                                              \
  Setting {                                                                                  \
    name, help, true,                                                                        \
        [](ExperimentConfig& c, const std::string& v) { c.field = to_bool(name, v); },       \
        [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }    \
  }
#define TEXT(name, field, help)                                                              \
  Setting {                                                                                  \
    name, help, false, [](ExperimentConfig& c, const std::string& v) { c.field = v; },       \
        [](const ExperimentConfig& c) { return c.field; }                                    \
  }

const std::vector<Setting>& setting_table() {
  static const std::vector<Setting> table = {
      Setting{"scenario", "uda | ssda | msda | mtda", false,
              [](ExperimentConfig& c, const std::string& v) { c.scenario = parse_scenario(v); },
              [](const ExperimentConfig& c) { return to_string(c.scenario); }},
      INT("shots", shots, "labeled target samples per class (ssda)"),
      SIZE("sources", sources, "source domains (msda)"),
      SIZE("targets", targets, "target domains (mtda)"),
      Setting{"dataset", "two_moons | blobs | csv", false,
              [](ExperimentConfig& c, const std::string& v) {
                if (v != "two_moons" && v != "blobs" && v != "csv") {
                  throw ParameterError("dataset: unknown dataset '" + v + "'");
                }
                c.dataset = v;
              },
              [](const ExperimentConfig& c) { return c.dataset; }},
      SIZE("samples", samples, "samples per domain (synthetic data)"),
      REAL("rotation", rotation, "target rotation in degrees (two_moons)"),
      REAL("noise", noise, "moon noise"),
      INT("classes", classes, "cluster count (blobs)"),
      REAL("shift_x", shift_x, "target shift, first coordinate (blobs)"),
      REAL("shift_y", shift_y, "target shift, second coordinate (blobs)"),
      REAL("spread", spread, "cluster standard deviation (blobs)"),
      REAL("domain_step", domain_step, "spacing of extra domains as a fraction of the shift"),
      REAL("imbalance", imbalance, "long-tail head/tail ratio"),
      BOOL("subpop_balance", subpop_balance, "balance the eval pool per domain-class pair"),
      TEXT("source_csv", source_csv, "comma-separated source CSV files"),
      TEXT("target_csv", target_csv, "comma-separated target CSV files"),
      Setting{"mode", "baseline | spa | spa_plus_plus | source_only", false,
              [](ExperimentConfig& c, const std::string& v) { c.train.mode = parse_mode(v); },
              [](const ExperimentConfig& c) { return to_string(c.train.mode); }},
      REAL("alpha", train.alpha, "spectral alignment weight"),
      REAL("beta_max", train.beta_max, "neighbour-aware propagation weight ceiling"),
      REAL("conf_threshold", train.conf_threshold, "confidence gate of the augmented propagation loss"),
      REAL("tau", train.tau, "sharpening temperature"),
      REAL("xi", train.xi, "memory bank EMA decay"),
      SIZE("k", train.k, "graph and bank neighbours"),
      Setting{"similarity", "cosine | gaussian | euclidean", false,
              [](ExperimentConfig& c, const std::string& v) {
                c.train.similarity = parse_similarity(v);
              },
              [](const ExperimentConfig& c) { return to_string(c.train.similarity); }},
      Setting{"laplacian", "sym | rwk", false,
              [](ExperimentConfig& c, const std::string& v) {
                c.train.laplacian = parse_laplacian(v);
              },
              [](const ExperimentConfig& c) { return to_string(c.train.laplacian); }},
      REAL("p_norm", train.p_norm, "order of the spectral distance"),
      BOOL("sparsify", train.sparsify, "k-NN sparsify batch graphs"),
      BOOL("detach_source", train.detach_source, "stop the alignment gradient into source features"),
      BOOL("nap_average", train.nap_average, "average the augmented propagation loss over the batch"),
      REAL("label_smoothing", train.label_smoothing, "classification label smoothing"),
      REAL("lr0", train.lr0, "base learning rate"),
      REAL("momentum", train.momentum, "SGD momentum"),
      REAL("weight_decay", train.weight_decay, "SGD weight decay"),
      REAL("head_lr_multiplier", train.head_lr_multiplier, "learning-rate factor of the bottleneck and heads"),
      SIZE("batch_size", train.batch_size, "samples per domain per step"),
      SIZE("epochs", train.epochs, "training epochs"),
      REAL("ramp_v", train.ramp_v, "consistency ramp ceiling"),
      REAL("ramp_t", train.ramp_T, "ramp horizon in steps (0 = all steps)"),
      REAL("jitter_sigma", train.augment.jitter_sigma, "augmentation noise"),
      REAL("scale_lo", train.augment.scale_lo, "augmentation scale lower bound"),
      REAL("scale_hi", train.augment.scale_hi, "augmentation scale upper bound"),
      SIZE("hidden_dim", train.hidden_dim, "hidden layer width"),
      SIZE("hidden_layers", train.hidden_layers, "hidden layer count"),
      SIZE("feature_dim", train.feature_dim, "bottleneck width"),
      BOOL("track_a_distance", train.track_a_distance, "report the A-distance every epoch"),
      Setting{"seed", "random seed (falls back to $SPA_SEED)", false,
              [](ExperimentConfig& c, const std::string& v) {
                c.train.seed = to_integer<std::uint64_t>("seed", v);
              },
              [](const ExperimentConfig& c) { return std::to_string(c.train.seed); }},
  };
  return table;
}

#undef REAL
#undef SIZE
#undef INT
#undef BOOL
#undef TEXT

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

}  // namespace

void set_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  for (const Setting& s : setting_table()) {
    if (key == s.key) {
      s.set(config, value);
      return;
    }
  }
  throw ParameterError("unknown setting '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> settings(const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Setting& s : setting_table()) out.emplace_back(s.key, s.get(config));
  return out;
}

std::vector<std::string> read_config(const std::filesystem::path& path,
                                     ExperimentConfig& config) {
  std::vector<std::string> keys;
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read config " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParameterError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    try {
      set_value(config, key, trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw ParameterError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    keys.push_back(key);
  }
  return keys;
}

void write_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "# resolved specalign configuration\n";
  for (const auto& [key, value] : settings(config)) out << key << " = " << value << '\n';
}

std::vector<Dataset> build_domains(const ExperimentConfig& c) {
  const std::size_t n_src = c.scenario == ScenarioKind::msda ? c.sources : 1;
  const std::size_t n_tgt = c.scenario == ScenarioKind::mtda ? c.targets : 1;
  std::vector<Dataset> domains;

  if (c.dataset == "csv") {
    const auto src = split_list(c.source_csv);
    const auto tgt = split_list(c.target_csv);
    if (src.empty() || tgt.empty()) {
      throw ParameterError("dataset csv needs source_csv and target_csv");
    }
    for (const auto& p : src) domains.push_back(load_csv(p));
    for (const auto& p : tgt) domains.push_back(load_csv(p));
    int classes = 0;
    for (const Dataset& d : domains) classes = std::max(classes, d.classes);
    for (std::size_t i = 0; i < domains.size(); ++i) {
      domains[i].classes = classes;
      std::fill(domains[i].domains.begin(), domains[i].domains.end(), static_cast<int>(i));
    }
    return domains;
  }

  // Position of each domain along the shift: 0 is the first source, 1 the
  // first target.
  std::vector<double> position;
  for (std::size_t j = 0; j < n_src; ++j) position.push_back(static_cast<double>(j) * c.domain_step);
  for (std::size_t j = 0; j < n_tgt; ++j) {
    position.push_back(1.0 - static_cast<double>(j) * c.domain_step);
  }
  for (std::size_t i = 0; i < position.size(); ++i) {
    const std::uint64_t seed = c.train.seed * 1000003ULL + i;
    const int domain = static_cast<int>(i);
    if (c.dataset == "two_moons") {
      domains.push_back(make_two_moons(c.samples, position[i] * c.rotation, c.noise, seed, domain));
    } else {
      const double shift[2] = {position[i] * c.shift_x, position[i] * c.shift_y};
      Dataset d = make_blob_shift(c.samples, c.classes, shift, c.spread, seed).second;
      std::fill(d.domains.begin(), d.domains.end(), domain);
      domains.push_back(std::move(d));
    }
  }
  return domains;
}

ScenarioSpec build_spec(const ExperimentConfig& c, std::size_t domain_count) {
  ScenarioSpec spec;
  spec.kind = c.scenario;
  spec.labeled_target_shots = c.shots;
  spec.imbalance_ratio = c.imbalance;
  spec.subpopulation_balance = c.subpop_balance;
  spec.seed = c.train.seed;
  spec.source_domains.clear();
  spec.target_domains.clear();
  std::size_t n_src = c.scenario == ScenarioKind::msda ? c.sources : 1;
  if (c.dataset == "csv") n_src = split_list(c.source_csv).size();
  for (std::size_t i = 0; i < domain_count; ++i) {
    (i < n_src ? spec.source_domains : spec.target_domains).push_back(i);
  }
  return spec;
}

std::string epoch_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["loss_cls"] = r.loss_cls;
  j["loss_adv"] = r.loss_adv;
  j["loss_gsa"] = r.loss_gsa;
  j["loss_nap"] = r.loss_nap;
  j["loss_con"] = r.loss_con;
  j["acc_source"] = r.acc_source;
  j["acc_target"] = r.acc_target;
  j["a_distance"] = r.a_distance;
  nlohmann::ordered_json by_domain = nlohmann::ordered_json::object();
  for (const auto& [domain, acc] : r.acc_source_by_domain) by_domain[std::to_string(domain)] = acc;
  j["acc_source_by_domain"] = by_domain;
  j["rejected_steps"] = r.rejected_steps;
  j["skipped_graphs"] = r.skipped_graphs;
  return j.dump();
}

Scenario prepare_scenario(const ExperimentConfig& config) {
  if (config.scenario == ScenarioKind::msda && config.sources < 2) {
    throw ParameterError("msda requires at least 2 sources");
  }
  if (config.scenario == ScenarioKind::mtda && config.targets < 2) {
    throw ParameterError("mtda requires at least 2 targets");
  }
  const std::vector<Dataset> domains = build_domains(config);
  return compose_scenario(build_spec(config, domains.size()), domains);
}

TrainReport run_experiment(const ExperimentConfig& config, const Scenario& scenario,
                           const std::filesystem::path& out_dir) {
  TrainReport report = run(config.train, scenario);

  std::filesystem::create_directories(out_dir);
  write_config(out_dir / "resolved.cfg", config);
  {
    std::ofstream out(out_dir / "metrics.jsonl");
    for (const EpochRecord& r : report.epochs) out << epoch_json(r) << '\n';
  }
  {
    std::ofstream out(out_dir / "curve.csv");
    out << "epoch,acc_source,acc_target\n";
    for (const EpochRecord& r : report.epochs) {
      out << r.epoch << ',' << fmt(r.acc_source) << ',' << fmt(r.acc_target) << '\n';
    }
  }
  save_checkpoint(out_dir / "checkpoint.bin", report.params);
  {
    std::size_t rejected = 0;
    for (const StepRecord& s : report.steps) rejected += s.rejected;
    nlohmann::ordered_json j;
    j["scenario"] = to_string(config.scenario);
    j["dataset"] = config.dataset;
    j["mode"] = to_string(config.train.mode);
    j["seed"] = config.train.seed;
    j["epochs"] = report.epochs.size() - 1;
    j["steps"] = report.steps.size();
    j["rejected_steps"] = rejected;
    j["final_acc_source"] = report.final_acc_source;
    j["final_acc_target"] = report.final_acc_target;
    j["initial_a_distance"] = report.epochs.front().a_distance;
    j["final_a_distance"] = report.epochs.back().a_distance;
    j["labeled_samples"] = scenario.labeled.size();
    j["unlabeled_samples"] = scenario.unlabeled.size();
    j["eval_samples"] = scenario.eval.size();
    std::ofstream out(out_dir / "summary.json");
    out << j.dump(2) << '\n';
  }
  return report;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
               const EigenSolver& solver) {
  CLI::App app{"Graph spectral alignment for domain adaptation", "specalign"};
  app.require_subcommand(1);

  CLI::App* run_cmd = app.add_subcommand("run", "train one experiment");
  std::string config_path;
  std::string out_dir;
  run_cmd->add_option("--config", config_path, "key = value configuration file");
  run_cmd->add_option("--out", out_dir, "output directory")->required();
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> options;
  for (const Setting& s : setting_table()) {
    const std::string name = "--" + dashed(s.key);
    if (s.is_flag) {
      flags[s.key] = false;
      options[s.key] =
          run_cmd->add_flag(name + ",!--no-" + dashed(s.key), flags[s.key], s.help);
    } else {
      options[s.key] = run_cmd->add_option(name, values[s.key], s.help);
    }
  }

  CLI::App* verify_cmd = app.add_subcommand("verify", "run the self-check suites");
  std::vector<std::string> suites;
  std::size_t trials = 0;
  std::uint64_t verify_seed = 0;
  verify_cmd->add_option("--suite", suites, "suite to run (repeatable; default all)")
      ->delimiter(',');
  verify_cmd->add_option("--trials", trials, "trials per suite");
  verify_cmd->add_option("--seed", verify_seed, "random seed");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (app.got_subcommand(run_cmd)) err << "run 'specalign run --help' for usage\n";
    return kExitUsage;
  }

  if (app.got_subcommand(verify_cmd)) {
    VerifyOptions opts;
    opts.suites = suites;
    opts.trials = trials;
    opts.seed = verify_seed;
    opts.solver = solver;
    for (const std::string& s : suites) {
      if (std::find(suite_names().begin(), suite_names().end(), s) == suite_names().end()) {
        err << "error: unknown suite '" << s << "'\n";
        return kExitUsage;
      }
    }
    return verify(opts, out);
  }

  ExperimentConfig config;
  Scenario scenario;
  try {
    bool seed_set = options["seed"]->count() > 0;
    if (!config_path.empty()) {
      const auto keys = read_config(config_path, config);
      seed_set = seed_set || std::find(keys.begin(), keys.end(), "seed") != keys.end();
    }
    for (const Setting& s : setting_table()) {
      if (options[s.key]->count() == 0) continue;
      s.set(config, s.is_flag ? (flags[s.key] ? "true" : "false") : values[s.key]);
    }
    if (!seed_set) {
      if (const char* env = std::getenv("SPA_SEED"); env != nullptr && *env != '\0') {
        set_value(config, "seed", env);
      }
    }
    validate(config.train);
    scenario = prepare_scenario(config);
  } catch (const std::exception& e) {
    // Anything that stops the experiment from being set up is a usage error.
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    const TrainReport report = run_experiment(config, scenario, out_dir);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "final acc_target %.4f  acc_source %.4f  a_distance %.4f\n",
                  report.final_acc_target, report.final_acc_source,
                  report.epochs.back().a_distance);
    out << buf << "outputs written to " << out_dir << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace specalign
