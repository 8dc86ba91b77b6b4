// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Random hyperparameter search over a finite product space.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "csn/dataset.hpp"
#include "csn/error.hpp"
#include "csn/model.hpp"
#include "csn/random.hpp"
#include "csn/train.hpp"

namespace csn {

/// A candidate value: a scalar, or a list of layer widths.
using HyperValue = std::variant<double, std::vector<Index>>;
using Assignment = std::map<std::string, HyperValue>;

inline std::string to_string(const HyperValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return format_real(*d);
  std::string s = "[";
  for (const auto w : std::get<std::vector<Index>>(v)) s += (s.size() > 1 ? ";" : "") + std::to_string(w);
  return s + "]";
}

inline double as_real(const Assignment& a, const std::string& key) {
  const auto it = a.find(key);
  if (it == a.end()) throw ConfigError("assignment lacks '" + key + "'");
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  throw ConfigError("hyperparameter '" + key + "' is not a scalar");
}

struct SearchSpace {
  std::vector<std::pair<std::string, std::vector<HyperValue>>> axes;

  void validate() const {
    if (axes.empty()) throw ConfigError("search space has no hyperparameters");
    for (const auto& [name, values] : axes) {
      if (values.empty()) throw ConfigError("search space axis '" + name + "' has no candidates");
    }
  }

  std::size_t combinations() const {
    std::size_t n = 1;
    for (const auto& axis : axes) n *= axis.second.size();
    return n;
  }

  /// One uniform draw from the product space.
  Assignment sample(Rng& rng) const {
    Assignment a;
    for (const auto& [name, values] : axes) {
      std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
      a[name] = values[pick(rng)];
    }
    return a;
  }
};

/// TreeNet tuning grid: lr, batch fraction, cross layers k, bases m and
/// projection width d.
inline SearchSpace treenet_search_space() {
  SearchSpace s;
  s.axes = {{"lr", {0.01, 0.02}},
            {"batch_fraction", {0.01, 0.02}},
            {"k", {0.0, 1.0, 2.0, 3.0}},
            {"m", {3.0, 5.0, 7.0}},
            {"d", {10.0, 20.0, 30.0, 40.0}}};
  return s;
}

inline SearchSpace fcnn_search_space() {
  using W = std::vector<Index>;
  SearchSpace s;
  s.axes = {{"layers",
             {W{20, 10, 5}, W{40, 20, 10}, W{60, 30, 15}, W{80, 40, 20}, W{100, 50, 25}, W{120, 60, 30, 15},
              W{100, 50, 25, 12}, W{80, 40, 20, 10}, W{10, 20, 40, 20, 10}, W{15, 30, 60, 30, 15}}},
            {"lr", {0.0001, 0.0005, 0.001, 0.002, 0.004, 0.008, 0.01, 0.015, 0.02}},
            {"batch_fraction", {0.01, 0.02, 0.04}}};
  return s;
}

/// Overrides the fields named in the assignment; unknown keys are errors.
inline CsnConfig apply_assignment(CsnConfig c, const Assignment& a) {
  for (const auto& [key, value] : a) {
    if (key == "lr") c.train.lr = as_real(a, key);
    else if (key == "batch_fraction") c.train.batch_fraction = as_real(a, key);
    else if (key == "decay") c.train.decay = as_real(a, key);
    else if (key == "k") c.k = static_cast<Index>(as_real(a, key));
    else if (key == "m") c.m = static_cast<Index>(as_real(a, key));
    else if (key == "d") c.d = static_cast<Index>(as_real(a, key));
    else throw ConfigError("unknown CSN hyperparameter '" + key + "'");
  }
  return c;
}

inline FcnnConfig apply_assignment(FcnnConfig c, const Assignment& a) {
  for (const auto& [key, value] : a) {
    if (key == "layers") {
      const auto* w = std::get_if<std::vector<Index>>(&value);
      if (!w) throw ConfigError("hyperparameter 'layers' must be a width list");
      c.hidden = *w;
    } else if (key == "lr") c.train.lr = as_real(a, key);
    else if (key == "batch_fraction") c.train.batch_fraction = as_real(a, key);
    else if (key == "decay") c.train.decay = as_real(a, key);
    else throw ConfigError("unknown FCNN hyperparameter '" + key + "'");
  }
  return c;
}

struct TrialRecord {
  std::size_t index = 0;
  Assignment assignment;
  std::uint64_t seed = 0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_auc = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = 0;
  int stopped_epoch = 0;
  std::string error;  // empty on success
};

struct SearchResult {
  std::size_t best_index = 0;
  Assignment best;
  FitResult best_fit;
  std::vector<TrialRecord> log;
};

/// Builds an untrained model for an assignment; `seed` drives initialization.
using ModelBuilder = std::function<Model(const Assignment&, std::uint64_t seed)>;

/// Fits `trials` independent uniform draws from `space` and keeps the one with
/// the lowest validation loss (ties go to the earlier trial). Trials may run
/// on `jobs` threads; each owns its model and a derived random stream, and
/// the log is ordered by trial index.
inline SearchResult random_search(const SearchSpace& space, std::size_t trials, const Dataset& data,
                                  const ModelBuilder& builder, std::uint64_t seed, unsigned jobs = 1) {
  if (trials < 1) throw ConfigError("random_search: trials must be >= 1");
  space.validate();
  Rng rng = make_rng(seed, stream::kSearch);
  std::vector<TrialRecord> log(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    log[t].index = t;
    log[t].assignment = space.sample(rng);
    log[t].seed = derive_seed(seed, stream::kTrial, t);
  }
  std::vector<std::optional<FitResult>> fits(trials);

  auto run_trial = [&](std::size_t t) {
    TrialRecord& rec = log[t];
    try {
      Model m = builder(rec.assignment, rec.seed);
      FitResult fr = fit(m, data, train_config_for(m));
      if (fr.failure) throw NumericError(*fr.failure);
      const SplitMetrics vm = evaluate_split(fr.model, data, Split::kValidation);
      rec.val_loss = vm.loss;
      rec.val_auc = vm.auc;
      rec.best_epoch = fr.history.best_epoch;
      rec.stopped_epoch = fr.history.stopped_epoch;
      fits[t] = std::move(fr);
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
  };

  if (jobs <= 1 || trials == 1) {
    for (std::size_t t = 0; t < trials; ++t) run_trial(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(jobs, trials); ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < trials; t = next++) run_trial(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::optional<std::size_t> best;
  for (std::size_t t = 0; t < trials; ++t) {
    if (!log[t].error.empty() || !std::isfinite(log[t].val_loss)) continue;
    if (!best || log[t].val_loss < log[*best].val_loss) best = t;
  }
  if (!best) {
    std::string msg = "random_search: all " + std::to_string(trials) + " trials failed:";
    for (const auto& rec : log) msg += "\n  trial " + std::to_string(rec.index) + ": " + rec.error;
    throw Error(msg);
  }
  SearchResult out;
  out.best_index = *best;
  out.best = log[*best].assignment;
  out.best_fit = std::move(*fits[*best]);
  out.log = std::move(log);
  return out;
}

}  // namespace csn
