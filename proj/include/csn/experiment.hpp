// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Declarative experiments: a JSON config names the data, the model and the
/// seeds; run_experiment executes it and writes CSV tables, a JSON report and
/// saved models. Every output carries the config hash and tool version, and
/// metric tables depend only on the config, so reruns are byte-identical.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "csn/dataset.hpp"
#include "csn/diagnostics.hpp"
#include "csn/error.hpp"
#include "csn/model.hpp"
#include "csn/model_io.hpp"
#include "csn/published.hpp"
#include "csn/search.hpp"
#include "csn/simgen.hpp"
#include "csn/train.hpp"

#ifndef CSN_VERSION
#define CSN_VERSION "0.0.0"
#endif

namespace csn {

inline constexpr const char* kToolVersion = CSN_VERSION;

/// Process exit codes shared by the CLI and the runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

enum class Task { kSimulate, kFit, kEvaluate, kSearch, kDiagnose, kReproduce };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::kSimulate: return "simulate";
    case Task::kFit: return "fit";
    case Task::kEvaluate: return "evaluate";
    case Task::kSearch: return "search";
    case Task::kDiagnose: return "diagnose";
    case Task::kReproduce: return "reproduce";
  }
  return "?";
}

inline std::optional<Task> parse_task(std::string_view s) {
  for (Task t : {Task::kSimulate, Task::kFit, Task::kEvaluate, Task::kSearch, Task::kDiagnose, Task::kReproduce}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct DataSpec {
  std::string source = "simulation";  // simulation | bike_sharing | csv
  std::string scenario = "main_cont";
  ResponseKind response = ResponseKind::kContinuous;
  std::string path;         // bike_sharing and csv sources
  std::uint64_t seed = 1;   // simulation draw or split shuffle
  SimulationSizes sizes;
  bool sizes_given = false;  // reproduce keeps the table protocol sizes otherwise
};

struct ModelSpec {
  std::string family = "csn";     // csn | fcnn
  std::string preset = "treenet2";  // treenet2 | custom
  Json overrides = Json::object();
};

struct DiagnosticsSpec {
  std::vector<Index> features;  // empty: the most important ones
  Index top = 6;
  Index grid = kDefaultGridSize;
  Index pd_subsample = kDefaultPdSubsample;
  Index h_subsample = kDefaultHSubsample;
  Index importance_repeats = 5;
  bool surface = true;  // 2d PDP of the strongest pair
};

struct ReproduceSpec {
  std::string table = "4-2";  // 4-2 | 4-3 | 4-4 | 5-2
  Index budget = 20;          // search trials for the tuned columns
  std::vector<std::string> algorithms{"treenet", "treenet2", "fcnn"};
  std::vector<std::string> rows;  // empty: every row of the table
};

struct ExperimentConfig {
  Task task = Task::kFit;
  DataSpec data;
  ModelSpec model;
  std::vector<std::uint64_t> seeds{1};
  std::string output = "csn_run";
  unsigned jobs = 1;
  Index trials = 20;
  std::string search_space = "treenet";  // treenet | fcnn
  std::string model_path;
  DiagnosticsSpec diagnostics;
  ReproduceSpec reproduce;
  Json echo;  // the normalized config as written to reports
};

namespace detail {

/// Collects every config problem before reporting.
class Problems {
 public:
  void add(std::string msg) { list_.push_back(std::move(msg)); }
  void throw_if_any() const {
    if (list_.empty()) return;
    std::string msg = "invalid experiment config:";
    for (const auto& p : list_) msg += "\n  - " + p;
    throw ConfigError(msg);
  }

 private:
  std::vector<std::string> list_;
};

template <class T>
std::optional<T> read_key(const Json& j, const std::string& key, Problems& problems) {
  if (!j.contains(key)) return std::nullopt;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    problems.add("'" + key + "' has the wrong type");
    return std::nullopt;
  }
}

inline std::string resolve(const std::string& path, const std::filesystem::path& base) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() || base.empty() ? p.string() : (base / p).lexically_normal().string();
}

}  // namespace detail

/// Parses and validates a config. Relative paths resolve against `base_dir`.
/// Every problem found is listed in a single ConfigError.
inline ExperimentConfig parse_experiment(const Json& j, const std::filesystem::path& base_dir = {}) {
  using detail::read_key;
  detail::Problems problems;
  ExperimentConfig c;
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");

  static const std::vector<std::string> known = {"task",  "data",        "model",      "seeds",      "output",
                                                 "jobs",  "trials",      "search_space", "model_path", "diagnostics",
                                                 "reproduce"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) problems.add("unknown key '" + key + "'");
  }

  if (auto t = read_key<std::string>(j, "task", problems)) {
    if (auto task = parse_task(*t)) c.task = *task;
    else problems.add("task '" + *t + "' is not one of simulate, fit, evaluate, search, diagnose, reproduce");
  }

  const Json data = j.value("data", Json::object());
  if (!data.is_object()) problems.add("'data' must be an object");
  else {
    if (auto s = read_key<std::string>(data, "source", problems)) c.data.source = *s;
    if (c.data.source != "simulation" && c.data.source != "bike_sharing" && c.data.source != "csv") {
      problems.add("data.source '" + c.data.source + "' is not one of simulation, bike_sharing, csv");
    }
    if (auto s = read_key<std::string>(data, "scenario", problems)) {
      c.data.scenario = *s;
      try {
        parse_scenario(*s);
      } catch (const ConfigError& e) {
        problems.add(std::string("data.scenario: ") + e.what());
      }
    }
    if (auto s = read_key<std::string>(data, "response", problems)) {
      try {
        c.data.response = parse_response(*s);
      } catch (const ConfigError& e) {
        problems.add(std::string("data.response: ") + e.what());
      }
    }
    if (auto s = read_key<std::string>(data, "path", problems)) c.data.path = detail::resolve(*s, base_dir);
    if (auto s = read_key<std::uint64_t>(data, "seed", problems)) c.data.seed = *s;
    if (auto n = read_key<Index>(data, "n", problems)) c.data.sizes.n = *n;
    if (auto n = read_key<Index>(data, "n_test", problems)) c.data.sizes.n_test = *n;
    c.data.sizes_given = data.contains("n") || data.contains("n_test");
    for (const auto& [key, value] : data.items()) {
      if (key != "source" && key != "scenario" && key != "response" && key != "path" && key != "seed" && key != "n" &&
          key != "n_test") {
        problems.add("unknown key 'data." + key + "'");
      }
    }
  }
  if (c.data.source == "bike_sharing") c.data.response = ResponseKind::kContinuous;
  if (c.data.source == "simulation" && (c.data.sizes.n < 2 || c.data.sizes.n_test < 0)) {
    problems.add("data.n must be >= 2 and data.n_test >= 0");
  }

  const Json model = j.value("model", Json::object());
  if (!model.is_object()) problems.add("'model' must be an object");
  else {
    if (auto s = read_key<std::string>(model, "family", problems)) c.model.family = *s;
    if (auto s = read_key<std::string>(model, "preset", problems)) c.model.preset = *s;
    if (c.model.family != "csn" && c.model.family != "fcnn") {
      problems.add("model.family '" + c.model.family + "' is not csn or fcnn");
    }
    if (c.model.preset != "treenet2" && c.model.preset != "custom") {
      problems.add("model.preset '" + c.model.preset + "' is not treenet2 or custom");
    }
    if (c.model.family == "fcnn" && !model.contains("preset")) c.model.preset = "custom";
    if (c.model.family == "fcnn" && c.model.preset == "treenet2") problems.add("preset treenet2 needs family csn");
    c.model.overrides = model;
    c.model.overrides.erase("family");
    c.model.overrides.erase("preset");
    try {
      if (c.model.family == "csn") csn_config_from_json(c.model.overrides, treenet2_config()).validate();
      else if (c.model.family == "fcnn") fcnn_config_from_json(c.model.overrides).validate();
    } catch (const std::exception& e) {
      problems.add(std::string("model: ") + e.what());
    }
  }

  if (auto s = read_key<std::vector<std::uint64_t>>(j, "seeds", problems)) c.seeds = *s;
  if (c.seeds.empty()) problems.add("seeds must not be empty");
  if (auto s = read_key<std::string>(j, "output", problems)) c.output = detail::resolve(*s, base_dir);
  if (auto n = read_key<unsigned>(j, "jobs", problems)) c.jobs = std::max(1u, *n);
  if (auto n = read_key<Index>(j, "trials", problems)) c.trials = *n;
  if (c.trials < 1) problems.add("trials must be >= 1");
  if (auto s = read_key<std::string>(j, "search_space", problems)) c.search_space = *s;
  if (c.search_space != "treenet" && c.search_space != "fcnn") problems.add("search_space must be treenet or fcnn");
  if (auto s = read_key<std::string>(j, "model_path", problems)) c.model_path = detail::resolve(*s, base_dir);

  if (j.contains("diagnostics")) {
    const Json& d = j.at("diagnostics");
    auto& D = c.diagnostics;
    if (auto v = read_key<std::vector<Index>>(d, "features", problems)) D.features = *v;
    if (auto v = read_key<Index>(d, "top", problems)) D.top = *v;
    if (auto v = read_key<Index>(d, "grid", problems)) D.grid = *v;
    if (auto v = read_key<Index>(d, "pd_subsample", problems)) D.pd_subsample = *v;
    if (auto v = read_key<Index>(d, "h_subsample", problems)) D.h_subsample = *v;
    if (auto v = read_key<Index>(d, "importance_repeats", problems)) D.importance_repeats = *v;
    if (auto v = read_key<bool>(d, "surface", problems)) D.surface = *v;
    if (D.grid < 2) problems.add("diagnostics.grid must be >= 2");
    if (D.importance_repeats < 1) problems.add("diagnostics.importance_repeats must be >= 1");
    if (D.top < 2 && D.features.empty()) problems.add("diagnostics.top must be >= 2");
  }

  if (j.contains("reproduce")) {
    const Json& r = j.at("reproduce");
    auto& R = c.reproduce;
    if (auto v = read_key<std::string>(r, "table", problems)) R.table = *v;
    if (auto v = read_key<Index>(r, "budget", problems)) R.budget = *v;
    if (auto v = read_key<std::vector<std::string>>(r, "algorithms", problems)) R.algorithms = *v;
    if (auto v = read_key<std::vector<std::string>>(r, "rows", problems)) R.rows = *v;
  }
  if (c.task == Task::kReproduce) {
    const auto& R = c.reproduce;
    if (R.table != "4-2" && R.table != "4-3" && R.table != "4-4" && R.table != "5-2") {
      problems.add("reproduce.table '" + R.table + "' is not one of 4-2, 4-3, 4-4, 5-2");
    }
    if (R.budget < 1) problems.add("reproduce.budget must be >= 1");
    for (const auto& a : R.algorithms) {
      if (a != "treenet" && a != "treenet2" && a != "fcnn") {
        problems.add("reproduce.algorithms: '" + a + "' is not treenet, treenet2 or fcnn");
      }
    }
    for (const auto& row : R.rows) {
      try {
        parse_scenario(row);
      } catch (const ConfigError& e) {
        problems.add(std::string("reproduce.rows: ") + e.what());
      }
    }
  }

  // Referenced files must exist.
  const bool needs_data_file = c.data.source != "simulation" &&
                               (c.task != Task::kReproduce || c.reproduce.table == "5-2");
  if (needs_data_file) {
    if (c.data.path.empty()) problems.add("data.path is required for source " + c.data.source);
    else if (!std::filesystem::exists(c.data.path)) problems.add("data file '" + c.data.path + "' does not exist");
  }
  if (c.task == Task::kReproduce && c.reproduce.table == "5-2" && c.data.source != "bike_sharing") {
    problems.add("table 5-2 needs data.source bike_sharing");
  }
  if (c.task == Task::kSimulate && c.data.source != "simulation") problems.add("simulate needs data.source simulation");
  if (c.task == Task::kEvaluate && c.model_path.empty()) problems.add("evaluate needs model_path");
  if (!c.model_path.empty() && !std::filesystem::exists(c.model_path)) {
    problems.add("model file '" + c.model_path + "' does not exist");
  }
  problems.throw_if_any();

  // Normalized echo: defaults filled in, paths resolved.
  Json e;
  e["task"] = std::string(to_string(c.task));
  e["data"] = {{"source", c.data.source},
               {"scenario", c.data.scenario},
               {"response", std::string(to_string(c.data.response))},
               {"path", c.data.path},
               {"seed", c.data.seed},
               {"n", c.data.sizes.n},
               {"n_test", c.data.sizes.n_test}};
  Json m = c.model.overrides;
  m["family"] = c.model.family;
  m["preset"] = c.model.preset;
  e["model"] = m;
  e["seeds"] = c.seeds;
  e["trials"] = c.trials;
  e["search_space"] = c.search_space;
  e["model_path"] = c.model_path;
  e["diagnostics"] = {{"features", c.diagnostics.features},
                      {"top", c.diagnostics.top},
                      {"grid", c.diagnostics.grid},
                      {"pd_subsample", c.diagnostics.pd_subsample},
                      {"h_subsample", c.diagnostics.h_subsample},
                      {"importance_repeats", c.diagnostics.importance_repeats},
                      {"surface", c.diagnostics.surface}};
  if (c.task == Task::kReproduce) {
    e["reproduce"] = {{"table", c.reproduce.table},
                      {"budget", c.reproduce.budget},
                      {"algorithms", c.reproduce.algorithms},
                      {"rows", c.reproduce.rows}};
  }
  c.echo = e;
  return c;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_experiment(j, std::filesystem::path(path).parent_path());
}

/// Hash of the normalized config. Output location and worker count do not
/// change results and are left out.
inline std::string config_hash(const ExperimentConfig& c) { return fnv1a_hex(c.echo.dump()); }

/// First line of every CSV output.
inline std::string provenance_line(const std::string& hash) {
  return std::string("# csn ") + kToolVersion + " config " + hash;
}

// ---------------------------------------------------------------------------
// Running fits

/// What a single seed produced.
struct SeedResult {
  std::uint64_t seed = 0;
  SplitMetrics train, validation, test;
  int best_epoch = 0;
  int stopped_epoch = 0;
  double seconds = 0.0;
  std::optional<std::string> failure;
  std::optional<Model> model;
  FitHistory history;
  std::vector<TrialRecord> trials;  // search runs only
  Assignment best_assignment;
};

inline Dataset load_data(const DataSpec& spec) {
  if (spec.source == "simulation") return gen_dataset(spec.scenario, spec.response, spec.seed, spec.sizes);
  if (spec.source == "bike_sharing") return load_bike_sharing(spec.path, spec.seed);
  return read_dataset_csv(spec.path, spec.response);
}

inline Head head_for(ResponseKind kind) { return kind == ResponseKind::kBinary ? Head::kBinary : Head::kRegression; }

/// Untrained model for a spec on a dataset.
inline Model build_model(const ModelSpec& spec, const Dataset& data, std::uint64_t seed) {
  const TrainingStats stats = compute_training_stats(data.features_of(Split::kTrain));
  if (spec.family == "fcnn") {
    FcnnConfig c = fcnn_config_from_json(spec.overrides);
    c.head = head_for(data.kind);
    c.train.seed = seed;
    return build_fcnn(c, data.features(), &stats.standardizer, data.feature_names);
  }
  CsnConfig c = csn_config_from_json(spec.overrides, treenet2_config(data.features()));
  c.head = head_for(data.kind);
  c.train.seed = seed;
  return build_csn(c, stats, data.feature_names);
}

inline void record_metrics(SeedResult& r, const Model& model, const Dataset& data) {
  r.train = evaluate_split(model, data, Split::kTrain);
  r.validation = evaluate_split(model, data, Split::kValidation);
  r.test = evaluate_split(model, data, Split::kTest);
}

inline SeedResult fit_seed(const ModelSpec& spec, const Dataset& data, std::uint64_t seed) {
  SeedResult r;
  r.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  FitResult fr = fit(build_model(spec, data, seed), data);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.failure = fr.failure;
  r.history = fr.history;
  r.best_epoch = fr.history.best_epoch;
  r.stopped_epoch = fr.history.stopped_epoch;
  record_metrics(r, fr.model, data);
  r.model = std::move(fr.model);
  return r;
}

/// Random search with `trials` draws; the base config supplies everything
/// the space does not.
inline SeedResult search_seed(const std::string& space_name, const ModelSpec& spec, const Dataset& data,
                              std::uint64_t seed, Index trials) {
  SeedResult r;
  r.seed = seed;
  const TrainingStats stats = compute_training_stats(data.features_of(Split::kTrain));
  const Head head = head_for(data.kind);
  ModelBuilder builder;
  SearchSpace space;
  if (space_name == "fcnn") {
    space = fcnn_search_space();
    FcnnConfig base = spec.family == "fcnn" ? fcnn_config_from_json(spec.overrides) : FcnnConfig{};
    builder = [=](const Assignment& a, std::uint64_t s) {
      FcnnConfig c = apply_assignment(base, a);
      c.head = head;
      c.train.seed = s;
      return build_fcnn(c, data.features(), &stats.standardizer, data.feature_names);
    };
  } else {
    space = treenet_search_space();
    const CsnConfig base = spec.family == "csn" ? csn_config_from_json(spec.overrides, treenet2_config(data.features()))
                                                : treenet2_config(data.features());
    builder = [=](const Assignment& a, std::uint64_t s) {
      CsnConfig c = apply_assignment(base, a);
      c.head = head;
      c.train.seed = s;
      return build_csn(c, stats, data.feature_names);
    };
  }
  const auto t0 = std::chrono::steady_clock::now();
  try {
    SearchResult sr = random_search(space, static_cast<std::size_t>(trials), data, builder, seed);
    r.trials = sr.log;
    r.best_assignment = sr.best;
    r.history = sr.best_fit.history;
    r.best_epoch = sr.best_fit.history.best_epoch;
    r.stopped_epoch = sr.best_fit.history.stopped_epoch;
    record_metrics(r, sr.best_fit.model, data);
    r.model = std::move(sr.best_fit.model);
  } catch (const Error& e) {
    r.failure = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// Runs `work(i)` for i in [0, n) on up to `jobs` threads.
template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& work) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < std::min<std::size_t>(jobs, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          work(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Mean and best-of-seeds for one metric on one split.
struct SeedSummary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double best = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::uint64_t> best_seed;
};

/// Summary over seeds that produced a finite value; "best" is the minimum,
/// or the maximum for AUC.
inline SeedSummary summarize(const std::vector<SeedResult>& runs, const std::string& metric, Split split) {
  SeedSummary s;
  double total = 0.0;
  int count = 0;
  for (const auto& r : runs) {
    const SplitMetrics& m = split == Split::kTrain ? r.train : split == Split::kValidation ? r.validation : r.test;
    const double v = metric == "mse" ? m.mse : metric == "auc" ? m.auc : m.loss;
    if (!std::isfinite(v)) continue;
    total += v;
    ++count;
    const bool better = metric == "auc" ? v > s.best : v < s.best;
    if (!s.best_seed || better) {
      s.best = v;
      s.best_seed = r.seed;
    }
  }
  if (count > 0) s.mean = total / count;
  return s;
}

// ---------------------------------------------------------------------------
// Output

struct RunReport {
  Task task = Task::kFit;
  std::string config_hash;
  std::string version = kToolVersion;
  Json config;
  std::vector<SeedResult> seeds;
  std::vector<std::string> artifacts;  // file names relative to the output dir
  std::vector<std::string> failures;
  Json extra = Json::object();

  bool ok() const { return failures.empty(); }
};

namespace detail {

class OutputDir {
 public:
  OutputDir(std::filesystem::path dir, std::string hash, RunReport& report)
      : dir_(std::move(dir)), hash_(std::move(hash)), report_(report) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    std::filesystem::remove(dir_ / "FAILED", ec);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  /// Opens a CSV whose first line is the provenance comment.
  std::ofstream csv(const std::string& name) {
    std::ofstream out(path(name));
    if (!out) throw DataError("cannot write '" + path(name) + "'");
    out << provenance_line(hash_) << '\n';
    note(name);
    return out;
  }

  void note(const std::string& name) {
    if (std::find(report_.artifacts.begin(), report_.artifacts.end(), name) == report_.artifacts.end()) {
      report_.artifacts.push_back(name);
    }
  }

  void save(const Model& model, const std::string& name) {
    Json j = model_to_json(model);
    j["provenance"] = {{"tool", "csn"}, {"version", kToolVersion}, {"config_hash", hash_}};
    std::ofstream out(path(name));
    if (!out) throw DataError("cannot write '" + path(name) + "'");
    out << j.dump(1) << '\n';
    note(name);
  }

  void json(const Json& j, const std::string& name) {
    Json body = j;
    body["provenance"] = {{"tool", "csn"}, {"version", kToolVersion}, {"config_hash", hash_}};
    std::ofstream out(path(name));
    if (!out) throw DataError("cannot write '" + path(name) + "'");
    out << body.dump(2) << '\n';
    note(name);
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::string hash_;
  RunReport& report_;
};

inline std::string num(double v) { return std::isfinite(v) ? format_real(v) : std::string("NA"); }

inline Json split_json(const SplitMetrics& m) {
  auto value = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  return {{"rows", m.rows}, {"loss", value(m.loss)}, {"mse", value(m.mse)}, {"auc", value(m.auc)}};
}

inline std::string assignment_string(const Assignment& a) {
  std::string s;
  for (const auto& [k, v] : a) s += (s.empty() ? "" : " ") + k + "=" + to_string(v);
  return s;
}

inline void write_metrics(OutputDir& out, const std::vector<SeedResult>& runs) {
  auto f = out.csv("metrics.csv");
  f << "seed,split,rows,loss,mse,auc,best_epoch,stopped_epoch,status\n";
  for (const auto& r : runs) {
    const std::pair<Split, const SplitMetrics*> splits[] = {
        {Split::kTrain, &r.train}, {Split::kValidation, &r.validation}, {Split::kTest, &r.test}};
    for (const auto& [split, m] : splits) {
      if (m->rows == 0 && !r.failure) continue;
      f << r.seed << ',' << to_string(split) << ',' << m->rows << ',' << num(m->loss) << ',' << num(m->mse) << ','
        << num(m->auc) << ',' << r.best_epoch << ',' << r.stopped_epoch << ',' << (r.failure ? "failed" : "ok")
        << '\n';
    }
  }
  auto s = out.csv("summary.csv");
  s << "split,metric,mean,best,best_seed\n";
  for (Split split : {Split::kTrain, Split::kValidation, Split::kTest}) {
    for (const char* metric : {"loss", "mse", "auc"}) {
      const SeedSummary sum = summarize(runs, metric, split);
      if (!sum.best_seed) continue;
      s << to_string(split) << ',' << metric << ',' << num(sum.mean) << ',' << num(sum.best) << ',' << *sum.best_seed
        << '\n';
    }
  }
}

inline void write_history(OutputDir& out, const SeedResult& r) {
  auto f = out.csv("history_seed" + std::to_string(r.seed) + ".csv");
  f << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < r.history.val_loss.size(); ++e) {
    f << e + 1 << ',' << num(r.history.train_loss[e]) << ',' << num(r.history.val_loss[e]) << '\n';
  }
}

inline void write_trials(OutputDir& out, const SeedResult& r) {
  auto f = out.csv("search_log_seed" + std::to_string(r.seed) + ".csv");
  f << "trial,assignment,trial_seed,val_loss,val_auc,best_epoch,stopped_epoch,error\n";
  for (const auto& t : r.trials) {
    std::string err = t.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    f << t.index << ',' << assignment_string(t.assignment) << ',' << t.seed << ',' << num(t.val_loss) << ','
      << num(t.val_auc) << ',' << t.best_epoch << ',' << t.stopped_epoch << ',' << err << '\n';
  }
}

inline Json seed_json(const SeedResult& r) {
  Json j{{"seed", r.seed},
         {"train", split_json(r.train)},
         {"validation", split_json(r.validation)},
         {"test", split_json(r.test)},
         {"best_epoch", r.best_epoch},
         {"stopped_epoch", r.stopped_epoch},
         {"wall_seconds", r.seconds}};
  if (r.failure) j["failure"] = *r.failure;
  if (!r.best_assignment.empty()) {
    Json a;
    for (const auto& [k, v] : r.best_assignment) {
      if (const auto* d = std::get_if<double>(&v)) a[k] = *d;
      else a[k] = std::get<std::vector<Index>>(v);
    }
    j["best_assignment"] = a;
  }
  return j;
}

inline void write_report(OutputDir& out, const RunReport& report) {
  Json j;
  j["tool"] = "csn";
  j["version"] = report.version;
  j["config_hash"] = report.config_hash;
  j["task"] = std::string(to_string(report.task));
  j["config"] = report.config;
  Json seeds = Json::array();
  for (const auto& r : report.seeds) seeds.push_back(seed_json(r));
  j["seeds"] = seeds;
  Json summary = Json::object();
  for (Split split : {Split::kTrain, Split::kValidation, Split::kTest}) {
    for (const char* metric : {"mse", "auc", "loss"}) {
      const SeedSummary s = summarize(report.seeds, metric, split);
      if (!s.best_seed) continue;
      summary[std::string(to_string(split))][metric] = {{"mean", s.mean}, {"best", s.best}, {"best_seed", *s.best_seed}};
    }
  }
  j["summary"] = summary;
  for (const auto& [k, v] : report.extra.items()) j[k] = v;
  j["status"] = report.ok() ? "ok" : "failed";
  j["failures"] = report.failures;
  j["artifacts"] = report.artifacts;
  out.json(j, "report.json");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Diagnostics

/// Features to probe: the configured list, else the `top` most important.
inline std::vector<Index> diagnostic_features(const DiagnosticsSpec& spec, const ImportanceTable& importance) {
  if (!spec.features.empty()) return spec.features;
  std::vector<Index> order(importance.importance.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return importance.importance[static_cast<std::size_t>(a)] > importance.importance[static_cast<std::size_t>(b)];
  });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(spec.top)));
  return order;
}

namespace detail {

inline void run_diagnostics(OutputDir& out, const Model& model, const Dataset& data, const DiagnosticsSpec& spec,
                            std::uint64_t seed, RunReport& report) {
  const auto f = as_predictor(model);
  const Metric metric = data.kind == ResponseKind::kBinary ? Metric::kAuc : Metric::kMse;
  const ImportanceTable imp = permutation_importance(f, data, metric, spec.importance_repeats, seed);
  {
    auto csv = out.csv("importance.csv");
    csv << "feature,score,metric,baseline\n";
    for (std::size_t i = 0; i < imp.features.size(); ++i) {
      csv << imp.features[i] << ',' << num(imp.importance[i]) << ',' << to_string(metric) << ',' << num(imp.baseline)
          << '\n';
    }
  }
  const std::vector<Index> features = diagnostic_features(spec, imp);
  for (Index j : features) {
    if (j < 0 || j >= data.features()) throw ConfigError("diagnostics feature " + std::to_string(j) + " out of range");
  }
  const Index anchor = random_anchor_row(data, seed);
  for (Index j : features) {
    const std::string name = detail::feature_name(data, j);
    const Curve pd = pdp1(f, data, j, spec.grid, spec.pd_subsample, seed);
    {
      auto csv = out.csv("pdp_" + name + ".csv");
      csv << "grid,value\n";
      for (std::size_t g = 0; g < pd.grid.size(); ++g) {
        csv << num(pd.grid[g]) << ',' << num(pd.values[static_cast<Index>(g)]) << '\n';
      }
    }
    {
      // ICE: every subsampled curve, plus the random anchor row.
      const Curve one = ice(f, data, anchor, j, spec.grid);
      auto csv = out.csv("ice_" + name + ".csv");
      csv << "curve,grid,value\n";
      for (Index r = 0; r < pd.ice.rows(); ++r) {
        for (std::size_t g = 0; g < pd.grid.size(); ++g) {
          csv << r << ',' << num(pd.grid[g]) << ',' << num(pd.ice(r, static_cast<Index>(g))) << '\n';
        }
      }
      for (std::size_t g = 0; g < one.grid.size(); ++g) {
        csv << "anchor" << anchor << ',' << num(one.grid[g]) << ',' << num(one.values[static_cast<Index>(g)]) << '\n';
      }
    }
  }
  std::vector<HStat> hs;
  if (features.size() >= 2) {
    hs = h_statistic_pairs(f, data, features, spec.h_subsample, seed);
    auto csv = out.csv("hstat.csv");
    csv << "feature_j,feature_k,h2,subsample\n";
    for (const auto& h : hs) {
      csv << detail::feature_name(data, h.j) << ',' << detail::feature_name(data, h.k) << ',' << num(h.h2) << ','
          << h.subsample << '\n';
    }
  }
  if (spec.surface && !hs.empty()) {
    const Surface s = pdp2(f, data, hs.front().j, hs.front().k, std::min<Index>(spec.grid, 25), spec.pd_subsample, seed);
    auto csv = out.csv("pdp2_" + s.feature_j + "_" + s.feature_k + ".csv");
    csv << s.feature_j << ',' << s.feature_k << ",value\n";
    for (std::size_t a = 0; a < s.grid_j.size(); ++a) {
      for (std::size_t b = 0; b < s.grid_k.size(); ++b) {
        csv << num(s.grid_j[a]) << ',' << num(s.grid_k[b]) << ','
            << num(s.values(static_cast<Index>(a), static_cast<Index>(b))) << '\n';
      }
    }
  }
  Json d{{"metric", std::string(to_string(metric))},
         {"features", Json::array()},
         {"anchor_row", anchor},
         {"seed", seed},
         {"model_hash", fnv1a_hex(model_to_json(model).dump())},
         {"grid", spec.grid},
         {"pd_subsample", spec.pd_subsample},
         {"h_subsample", spec.h_subsample},
         {"importance_repeats", spec.importance_repeats}};
  for (Index j : features) d["features"].push_back(detail::feature_name(data, j));
  out.json(d, "diagnostics.json");
  report.extra["diagnostics"] = d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Reproduction of the published tables

/// Acceptance band for one (table, algorithm, metric) cell; returns "pass",
/// "fail" or "n/a" when no band applies.
inline std::string reproduction_status(const std::string& table, const std::string& algorithm, bool auc,
                                       double ours, double paper) {
  if (!std::isfinite(ours)) return "fail";
  if (table == "5-2") {
    if (algorithm == "fcnn") return ours <= 0.150 ? "pass" : "fail";
    return ours <= 0.125 ? "pass" : "fail";
  }
  if (auc) {
    const double slack = algorithm == "fcnn" ? 0.05 : 0.02;
    return ours >= paper - slack ? "pass" : "fail";
  }
  const double slack = algorithm == "fcnn" ? 0.3 : 0.15;
  return ours <= paper + slack && ours >= 0.97 ? "pass" : "fail";
}

namespace detail {

struct ReproRow {
  std::string name;
  const published::Row* paper;
  bool auc;  // binary response, compared on AUC
};

inline std::vector<ReproRow> reproduction_rows(const ReproduceSpec& spec) {
  std::vector<ReproRow> rows;
  auto take = [&](const auto& table, bool auc) {
    for (const auto& r : table) {
      const std::string name(r.name);
      if (spec.rows.empty() || std::find(spec.rows.begin(), spec.rows.end(), name) != spec.rows.end()) {
        rows.push_back({name, &r, auc});
      }
    }
  };
  if (spec.table == "4-2") take(published::kSimulationMse, false);
  else if (spec.table == "4-3") take(published::kSimulationAuc, true);
  else if (spec.table == "5-2") rows.push_back({"bike_sharing", &published::kBikeSharingMse, false});
  else {
    // 4-4 has a continuous and a binary block.
    take(published::kLargeSampleMse, false);
    take(published::kLargeSampleAuc, true);
  }
  return rows;
}

}  // namespace detail

inline void run_reproduce(const ExperimentConfig& cfg, detail::OutputDir& out, RunReport& report) {
  const ReproduceSpec& spec = cfg.reproduce;
  const auto rows = detail::reproduction_rows(spec);
  struct Job {
    std::size_t row;
    bool auc;
    std::string algorithm;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& a : spec.algorithms) {
      for (auto seed : cfg.seeds) jobs.push_back({i, rows[i].auc, a, seed});
    }
  }

  // One dataset per (row, response); fits share it read-only.
  std::vector<std::optional<Dataset>> data(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    DataSpec ds = cfg.data;
    if (spec.table == "5-2") {
      ds.source = "bike_sharing";
    } else {
      ds.source = "simulation";
      ds.scenario = rows[i].name;
      ds.response = rows[i].auc ? ResponseKind::kBinary : ResponseKind::kContinuous;
      if (!cfg.data.sizes_given) {
        ds.sizes.n = spec.table == "4-4" ? 50000 : 10000;
        ds.sizes.n_test = 50000;
      }
    }
    data[i] = load_data(ds);
  }

  std::vector<SeedResult> results(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t k) {
    const Job& job = jobs[k];
    const Dataset& d = *data[job.row];
    ModelSpec ms;
    if (job.algorithm == "treenet2") results[k] = fit_seed(ms, d, job.seed);
    else if (job.algorithm == "treenet") results[k] = search_seed("treenet", ms, d, job.seed, spec.budget);
    else {
      ms.family = "fcnn";
      ms.preset = "custom";
      results[k] = search_seed("fcnn", ms, d, job.seed, spec.budget);
    }
  });

  auto per_seed = out.csv("reproduce_runs.csv");
  per_seed << "table,row,algorithm,seed,train_mse,test_mse,train_auc,test_auc,best_epoch,status\n";
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto& r = results[k];
    per_seed << spec.table << ',' << rows[jobs[k].row].name << ',' << jobs[k].algorithm << ',' << r.seed << ','
             << detail::num(r.train.mse) << ',' << detail::num(r.test.mse) << ',' << detail::num(r.train.auc) << ','
             << detail::num(r.test.auc) << ',' << r.best_epoch << ',' << (r.failure ? "failed" : "ok") << '\n';
    if (r.failure) report.failures.push_back(rows[jobs[k].row].name + "/" + jobs[k].algorithm + "/seed " +
                                             std::to_string(r.seed) + ": " + *r.failure);
  }

  auto cmp = out.csv("comparison.csv");
  cmp << "table,row,algorithm,metric,split,ours_mean,ours_best,paper,status\n";
  Json summary = Json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto* paper = rows[i].paper;
    const bool auc = rows[i].auc;
    const std::string metric = auc ? "auc" : "mse";
    for (const auto& alg : published::kReferenceAlgorithms) {
      const std::string a(alg);
      const std::size_t col = *published::algorithm_column(a);
      for (Split split : {Split::kTrain, Split::kTest}) {
        const double ref = split == Split::kTrain ? paper->train[col] : paper->test[col];
        cmp << spec.table << ',' << rows[i].name << ',' << a << ',' << metric << ',' << to_string(split) << ',';
        if (published::is_external(a) || std::find(spec.algorithms.begin(), spec.algorithms.end(), a) ==
                                             spec.algorithms.end()) {
          const char* why = published::is_external(a) ? "external (not run)" : "not requested";
          cmp << "NA,NA," << format_real(ref) << ',' << why << '\n';
          continue;
        }
        std::vector<SeedResult> mine;
        for (std::size_t k = 0; k < jobs.size(); ++k) {
          if (jobs[k].row == i && jobs[k].algorithm == a) mine.push_back(results[k]);
        }
        const SeedSummary s = summarize(mine, metric, split);
        const std::string status =
            split == Split::kTest ? reproduction_status(spec.table, a, auc, s.best, ref) : std::string("n/a");
        cmp << detail::num(s.mean) << ',' << detail::num(s.best) << ',' << format_real(ref) << ',' << status << '\n';
        if (split == Split::kTest) {
          summary.push_back({{"row", rows[i].name}, {"algorithm", a}, {"metric", metric}, {"best", s.best},
                             {"paper", ref}, {"status", status}});
        }
      }
    }
  }
  report.extra["comparison"] = summary;
}

// ---------------------------------------------------------------------------
// Entry point

/// Executes a parsed config. Artifacts are written as they become available;
/// a runtime failure leaves them in place with a FAILED marker and rethrows.
inline RunReport run_experiment(const ExperimentConfig& cfg) {
  RunReport report;
  report.task = cfg.task;
  report.config = cfg.echo;
  report.config_hash = config_hash(cfg);
  detail::OutputDir out(cfg.output, report.config_hash, report);

  try {
    switch (cfg.task) {
      case Task::kSimulate: {
        for (auto seed : cfg.seeds) {
          DataSpec ds = cfg.data;
          ds.seed = seed;
          const Dataset d = load_data(ds);
          const std::string name = "data_" + ds.scenario + "_" + std::string(to_string(ds.response)) + "_seed" +
                                   std::to_string(seed) + ".csv";
          write_dataset_csv(d, out.path(name), provenance_line(report.config_hash).substr(2));
          out.note(name);
        }
        break;
      }
      case Task::kFit:
      case Task::kSearch:
      case Task::kDiagnose: {
        const Dataset data = load_data(cfg.data);
        std::vector<SeedResult> runs(cfg.seeds.size());
        if (cfg.task == Task::kDiagnose && !cfg.model_path.empty()) {
          SeedResult r;
          r.seed = cfg.seeds.front();
          r.model = load_model(cfg.model_path);
          record_metrics(r, *r.model, data);
          runs = {std::move(r)};
        } else {
          parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
            runs[i] = cfg.task == Task::kSearch ? search_seed(cfg.search_space, cfg.model, data, cfg.seeds[i], cfg.trials)
                                                : fit_seed(cfg.model, data, cfg.seeds[i]);
          });
        }
        for (const auto& r : runs) {
          if (r.failure) {
            report.failures.push_back("seed " + std::to_string(r.seed) + ": " + *r.failure);
          }
          if (r.model && cfg.model_path.empty()) out.save(*r.model, "model_seed" + std::to_string(r.seed) + ".json");
          if (!r.history.val_loss.empty()) detail::write_history(out, r);
          if (cfg.task == Task::kSearch) {
            detail::write_trials(out, r);
            if (!r.failure) {
              Json best;
              for (const auto& [k, v] : r.best_assignment) {
                if (const auto* d = std::get_if<double>(&v)) best[k] = *d;
                else best[k] = std::get<std::vector<Index>>(v);
              }
              out.json({{"seed", r.seed}, {"search_space", cfg.search_space}, {"best", best}},
                       "best_config_seed" + std::to_string(r.seed) + ".json");
            }
          }
        }
        detail::write_metrics(out, runs);
        if (cfg.task == Task::kDiagnose) {
          // Probe the seed with the lowest validation loss.
          const SeedResult* pick = nullptr;
          for (const auto& r : runs) {
            if (r.model && !r.failure && (!pick || r.validation.loss < pick->validation.loss)) pick = &r;
          }
          if (!pick) throw Error("no seed produced a model to diagnose");
          detail::run_diagnostics(out, *pick->model, data, cfg.diagnostics, pick->seed, report);
        }
        for (auto& r : runs) r.model.reset();
        report.seeds = std::move(runs);
        break;
      }
      case Task::kEvaluate: {
        const Dataset data = load_data(cfg.data);
        const Model model = load_model(cfg.model_path);
        if (model.features() != data.features()) {
          throw DataError("model expects " + std::to_string(model.features()) + " features, data has " +
                          std::to_string(data.features()));
        }
        SeedResult r;
        r.seed = cfg.seeds.front();
        record_metrics(r, model, data);
        const Vector pred = predict(model, data.X);
        auto csv = out.csv("predictions.csv");
        csv << "row,split,target,prediction\n";
        for (Index i = 0; i < data.rows(); ++i) {
          csv << i << ',' << to_string(data.split[static_cast<std::size_t>(i)]) << ',' << format_real(data.y[i]) << ','
              << format_real(pred[i]) << '\n';
        }
        report.seeds = {r};
        detail::write_metrics(out, report.seeds);
        break;
      }
      case Task::kReproduce:
        run_reproduce(cfg, out, report);
        break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    report.failures.push_back(e.what());
  }
  detail::write_report(out, report);
  if (!report.ok()) {
    std::ofstream marker(out.path("FAILED"));
    for (const auto& f : report.failures) marker << f << '\n';
  }
  return report;
}

}  // namespace csn
