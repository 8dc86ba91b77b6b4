// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Simulation scenarios over independent Uniform(-1, 1) predictors and the
/// UCI bike-sharing (hourly) loader.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "csn/dataset.hpp"
#include "csn/error.hpp"
#include "csn/linalg.hpp"
#include "csn/nncore.hpp"
#include "csn/random.hpp"

namespace csn {

enum class Scenario { kMainCont, kMainJump, k2WayCont, k2WayJump, k2WayPure, k3WayCont, k3WayJump, k3WayPure };

inline constexpr std::array<Scenario, 8> kAllScenarios = {
    Scenario::kMainCont, Scenario::kMainJump, Scenario::k2WayCont, Scenario::k2WayJump,
    Scenario::k2WayPure, Scenario::k3WayCont, Scenario::k3WayJump, Scenario::k3WayPure};

inline std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::kMainCont: return "main_cont";
    case Scenario::kMainJump: return "main_jump";
    case Scenario::k2WayCont: return "2way_cont";
    case Scenario::k2WayJump: return "2way_jump";
    case Scenario::k2WayPure: return "2way_pure";
    case Scenario::k3WayCont: return "3way_cont";
    case Scenario::k3WayJump: return "3way_jump";
    case Scenario::k3WayPure: return "3way_pure";
  }
  return "?";
}

inline std::string scenario_names() {
  std::string out;
  for (auto s : kAllScenarios) {
    if (!out.empty()) out += ", ";
    out += to_string(s);
  }
  return out;
}

inline Scenario parse_scenario(std::string_view name) {
  for (auto s : kAllScenarios) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown scenario '" + std::string(name) + "'; valid names: " + scenario_names());
}

inline constexpr Index kSimulationFeatures = 30;
inline constexpr Index kScenarioSignalFeatures = 6;
inline constexpr Index kCalibrationDraws = 100000;

namespace detail {
inline double ind(bool c) { return c ? 1.0 : 0.0; }

// Terms in x1..x4 shared by every non-pure scenario.
inline double base_terms(const double* x) {
  return x[0] + 2.0 * x[1] * x[1] + 2.0 * std::cbrt(1.0 + x[2]) + 2.0 * x[3] * ind(x[3] > 0.0);
}
inline double cont_main(const double* x) {
  return base_terms(x) + std::sin(2.0 * std::numbers::pi * x[4]) + std::exp(x[5]);
}
inline double jump_main(const double* x) { return base_terms(x) + ind(x[4] > 0.0) + 2.0 * ind(x[5] > 0.5); }
inline double cont_2way(const double* x) {
  return 2.0 * x[0] * x[1] + 2.0 * std::sin(std::numbers::pi * (x[2] + x[3])) + 2.0 * std::abs(x[4] * x[5]);
}
inline double jump_2way(const double* x) {
  return 2.0 * ind(x[0] > 0.0) * ind(x[1] > 0.0) + 2.0 * ind(x[2] > 0.0) * ind(x[3] > 0.0) +
         2.0 * x[4] * ind(x[5] > 0.0);
}
inline double pure_2way(const double* x) {
  return 2.0 * x[0] * x[1] + std::sin(std::numbers::pi * (x[2] + x[3])) + x[4] * std::sin(std::numbers::pi * x[5]);
}
}  // namespace detail

/// Noise-free response f(x). Only x1..x6 enter; the rest are noise features.
inline double scenario_value(Scenario s, const double* x) {
  using namespace detail;
  constexpr double pi = std::numbers::pi;
  switch (s) {
    case Scenario::kMainCont: return cont_main(x);
    case Scenario::kMainJump: return jump_main(x);
    case Scenario::k2WayCont: return cont_main(x) + cont_2way(x);
    case Scenario::k2WayJump: return jump_main(x) + jump_2way(x);
    case Scenario::k2WayPure: return pure_2way(x);
    case Scenario::k3WayCont:
      return cont_main(x) + cont_2way(x) + 3.0 * x[0] * std::exp(std::abs(x[1] * x[2])) +
             3.0 * x[4] * std::sin(pi * (x[3] + 1.5 * x[5]));
    case Scenario::k3WayJump:
      return jump_main(x) + jump_2way(x) + 3.0 * ind(x[0] > 0.0) * ind(x[1] > 0.5) * ind(x[2] < -0.5) +
             3.0 * ind(x[3] > 0.0) * ind(x[4] < -0.5) * ind(x[5] < -0.5);
    case Scenario::k3WayPure:
      return pure_2way(x) + 2.0 * x[0] * x[1] * x[2] + 2.0 * x[3] * std::sin(pi * (x[4] + x[5]));
  }
  return 0.0;
}

inline double scenario_value(Scenario s, const Vector& x) {
  if (x.size() < kScenarioSignalFeatures) {
    throw ConfigError("scenario_value needs at least 6 features, got " + std::to_string(x.size()));
  }
  return scenario_value(s, x.data());
}

inline double scenario_value(std::string_view name, const Vector& x) { return scenario_value(parse_scenario(name), x); }

inline Vector scenario_values(Scenario s, const Matrix& X) {
  if (X.cols() < kScenarioSignalFeatures) throw ConfigError("scenario needs at least 6 features");
  Vector f(X.rows());
  for (Index i = 0; i < X.rows(); ++i) f[i] = scenario_value(s, X.row(i).data());
  return f;
}

/// n x p matrix of i.i.d. Uniform(-1, 1) draws from a seeded generator.
inline Matrix gen_design(Index n, Index p, std::uint64_t seed) {
  if (n < 1) throw ConfigError("gen_design: n must be >= 1");
  if (p < 1) throw ConfigError("gen_design: p must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix X(n, p);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
  return X;
}

/// Solves mean(sigmoid(beta0 + f)) = 0.5 by bisection. The mean is strictly
/// increasing in beta0, so the bracket [-max f - 40, -min f + 40] contains
/// exactly one root.
inline double calibrate_beta0(const Vector& f) {
  if (f.size() == 0) throw DataError("calibrate_beta0: empty sample");
  auto excess = [&](double b) {
    double s = 0.0;
    for (Index i = 0; i < f.size(); ++i) s += sigmoid(b + f[i]);
    return s / static_cast<double>(f.size()) - 0.5;
  };
  double lo = -f.maxCoeff() - 40.0;
  double hi = -f.minCoeff() + 40.0;
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    mid = 0.5 * (lo + hi);
    if (excess(mid) < 0.0) lo = mid; else hi = mid;
  }
  return mid;
}

/// Intercept that balances classes for a scenario, from 100,000 fresh
/// design draws on the calibration stream.
inline double scenario_beta0(Scenario s, std::uint64_t seed) {
  const Matrix X = gen_design(kCalibrationDraws, kScenarioSignalFeatures, derive_seed(seed, stream::kCalibration));
  return calibrate_beta0(scenario_values(s, X));
}

struct SimulationSizes {
  Index n = 10000;       // split 70% train / 30% validation
  Index n_test = 50000;  // independent test rows
};

namespace detail {
inline Vector simulate_response(Scenario s, const Matrix& X, ResponseKind kind, double beta0, std::uint64_t seed) {
  const Vector f = scenario_values(s, X);
  Rng rng(seed);
  Vector y(X.rows());
  if (kind == ResponseKind::kContinuous) {
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Index i = 0; i < y.size(); ++i) y[i] = f[i] + noise(rng);
  } else {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index i = 0; i < y.size(); ++i) y[i] = u(rng) < sigmoid(beta0 + f[i]) ? 1.0 : 0.0;
  }
  return y;
}
}  // namespace detail

/// Simulated dataset: the first 70% of the n rows train, the remaining 30%
/// validate, and n_test further rows (independent seed branch) form the test
/// split. Continuous responses add N(0, 1) noise; binary responses are
/// Bernoulli with P(y = 1) = sigmoid(beta0 + f(x)).
inline Dataset gen_dataset(Scenario s, ResponseKind kind, std::uint64_t seed, SimulationSizes sizes = {}) {
  if (sizes.n < 2) throw ConfigError("gen_dataset: n must be >= 2");
  if (sizes.n_test < 0) throw ConfigError("gen_dataset: n_test must be >= 0");
  const double beta0 = kind == ResponseKind::kBinary ? scenario_beta0(s, seed) : 0.0;
  const Matrix Xfit = gen_design(sizes.n, kSimulationFeatures, derive_seed(seed, stream::kDesign));
  const Vector yfit = detail::simulate_response(s, Xfit, kind, beta0, derive_seed(seed, stream::kNoise));
  Dataset d;
  d.kind = kind;
  d.seed = seed;
  d.scenario = std::string(to_string(s));
  for (Index j = 0; j < kSimulationFeatures; ++j) d.feature_names.push_back("x" + std::to_string(j + 1));
  const Index total = sizes.n + sizes.n_test;
  d.X.resize(total, kSimulationFeatures);
  d.y.resize(total);
  d.X.topRows(sizes.n) = Xfit;
  d.y.head(sizes.n) = yfit;
  if (sizes.n_test > 0) {
    const Matrix Xt = gen_design(sizes.n_test, kSimulationFeatures, derive_seed(seed, stream::kTestDesign));
    d.X.bottomRows(sizes.n_test) = Xt;
    d.y.tail(sizes.n_test) = detail::simulate_response(s, Xt, kind, beta0, derive_seed(seed, stream::kTestNoise));
  }
  const Index n_train = sizes.n * 7 / 10;
  d.split.assign(static_cast<std::size_t>(total), Split::kTest);
  for (Index i = 0; i < sizes.n; ++i) d.split[static_cast<std::size_t>(i)] = i < n_train ? Split::kTrain : Split::kValidation;
  return d;
}

inline Dataset gen_dataset(std::string_view name, ResponseKind kind, std::uint64_t seed, SimulationSizes sizes = {}) {
  return gen_dataset(parse_scenario(name), kind, seed, sizes);
}

/// Predictor columns taken from the UCI `hour.csv` file, in model order.
inline const std::vector<std::string>& bike_sharing_predictors() {
  static const std::vector<std::string> cols = {"season",     "yr",         "mnth", "hr",  "holiday",  "weekday",
                                                "workingday", "weathersit", "temp", "hum", "windspeed"};
  return cols;
}

/// Loads the UCI bike-sharing hourly file. Target is log(cnt); rows are
/// shuffled with `seed` and split 50% / 25% / 25% into train / val / test.
inline Dataset load_bike_sharing(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open bike-sharing file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) pos[header[i]] = i;
  std::vector<std::string> missing;
  std::vector<std::size_t> cols;
  for (const auto& name : bike_sharing_predictors()) {
    if (!pos.count(name)) missing.push_back(name); else cols.push_back(pos[name]);
  }
  if (!pos.count("cnt")) missing.push_back("cnt");
  if (!missing.empty()) {
    std::string msg = path + ": missing columns:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  const std::size_t cnt_col = pos["cnt"];
  std::vector<double> values;
  std::vector<double> target;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (fields.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t c : cols) values.push_back(parse_real(fields[c], where));
    const double count = parse_real(fields[cnt_col], where);
    if (!(count > 0.0)) throw DataError(where + ": cnt must be positive, got " + fields[cnt_col]);
    target.push_back(std::log(count));
  }
  if (target.empty()) throw DataError(path + ": no data rows");
  Dataset d;
  d.kind = ResponseKind::kContinuous;
  d.seed = seed;
  d.feature_names = bike_sharing_predictors();
  const auto n = static_cast<Index>(target.size());
  d.X = Eigen::Map<Matrix>(values.data(), n, static_cast<Index>(cols.size()));
  d.y = Eigen::Map<Vector>(target.data(), n);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, stream::kSplit);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(n / 2);
  const auto n_val = static_cast<std::size_t>(n / 4);
  d.split.assign(static_cast<std::size_t>(n), Split::kTest);
  for (std::size_t r = 0; r < order.size(); ++r) {
    d.split[order[r]] = r < n_train ? Split::kTrain : (r < n_train + n_val ? Split::kValidation : Split::kTest);
  }
  return d;
}

}  // namespace csn
