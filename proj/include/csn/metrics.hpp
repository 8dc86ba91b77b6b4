// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "csn/error.hpp"
#include "csn/linalg.hpp"

namespace csn {

enum class Metric { kMse, kAuc, kLogLoss };

inline std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kMse: return "mse";
    case Metric::kAuc: return "auc";
    case Metric::kLogLoss: return "logloss";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "mse") return Metric::kMse;
  if (s == "auc") return Metric::kAuc;
  if (s == "logloss") return Metric::kLogLoss;
  throw ConfigError("unknown metric '" + std::string(s) + "' (expected mse, auc or logloss)");
}

/// Larger-is-better metrics flip the sign of "degradation".
inline bool higher_is_better(Metric m) { return m == Metric::kAuc; }

namespace detail {
inline void check_lengths(const Vector& y, const Vector& pred) {
  if (y.size() != pred.size()) {
    throw ConfigError("metric: " + std::to_string(y.size()) + " targets but " + std::to_string(pred.size()) +
                      " predictions");
  }
  if (y.size() == 0) throw MetricError("metric on an empty sample");
}
}  // namespace detail

inline double mse(const Vector& y, const Vector& pred) {
  detail::check_lengths(y, pred);
  return (y - pred).squaredNorm() / static_cast<double>(y.size());
}

/// Mean negative log-likelihood with probabilities clipped to [1e-12, 1 - 1e-12].
inline double logloss(const Vector& y, const Vector& prob) {
  detail::check_lengths(y, prob);
  double total = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double p = std::clamp(prob[i], 1e-12, 1.0 - 1e-12);
    total -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(y.size());
}

/// Mann-Whitney rank statistic with midranks for tied scores. Targets are
/// treated as positive when y > 0.5.
inline double auc(const Vector& y, const Vector& score) {
  detail::check_lengths(y, score);
  const auto n = static_cast<std::size_t>(y.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[static_cast<Index>(a)] < score[static_cast<Index>(b)]; });
  double rank_sum = 0.0;
  double positives = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && score[static_cast<Index>(order[j + 1])] == score[static_cast<Index>(order[i])]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (y[static_cast<Index>(order[t])] > 0.5) {
        rank_sum += midrank;
        positives += 1.0;
      }
    }
    i = j + 1;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) throw MetricError("auc is undefined when only one class is present");
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

inline double evaluate(Metric metric, const Vector& y, const Vector& pred) {
  switch (metric) {
    case Metric::kMse: return mse(y, pred);
    case Metric::kAuc: return auc(y, pred);
    case Metric::kLogLoss: return logloss(y, pred);
  }
  return 0.0;
}

}  // namespace csn
