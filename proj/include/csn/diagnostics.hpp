// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Post-hoc model probes: ICE curves, one- and two-dimensional partial
/// dependence, permutation importance and the Friedman-Popescu H-statistic.
///
/// Every probe is a template over a predictor, i.e. any callable mapping an
/// n x p Matrix to an n-vector of predictions. `as_predictor(model)` adapts a
/// Model.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "csn/dataset.hpp"
#include "csn/error.hpp"
#include "csn/linalg.hpp"
#include "csn/log.hpp"
#include "csn/metrics.hpp"
#include "csn/model.hpp"
#include "csn/random.hpp"

namespace csn {

inline constexpr Index kDefaultGridSize = 50;
inline constexpr Index kDefaultPdSubsample = 500;
inline constexpr Index kDefaultHSubsample = 300;

inline auto as_predictor(const Model& model) {
  return [&model](const Matrix& X) -> Vector { return predict(model, X); };
}

/// Prediction path(s) along a grid of one feature.
struct Curve {
  std::string feature;
  Index feature_index = 0;
  std::vector<double> grid;
  Vector values;  // PDP: mean of `ice` rows; ICE: the single curve
  Matrix ice;     // rows x grid, one row per anchor observation
  std::optional<Index> anchor_row;
};

struct Surface {
  std::string feature_j;
  std::string feature_k;
  std::vector<double> grid_j;
  std::vector<double> grid_k;
  Matrix values;  // grid_j x grid_k
};

struct ImportanceTable {
  std::vector<std::string> features;
  std::vector<double> importance;
  double baseline = 0.0;
  Metric metric = Metric::kMse;
  Index repeats = 1;
  std::uint64_t seed = 0;
};

struct HStat {
  Index j = 0;
  Index k = 0;
  double h2 = 0.0;
  Index subsample = 0;
};

namespace detail {

inline void check_feature(const Dataset& data, Index feature) {
  if (feature < 0 || feature >= data.features()) {
    throw ConfigError("feature index " + std::to_string(feature) + " out of range [0, " +
                      std::to_string(data.features()) + ")");
  }
}

inline std::string feature_name(const Dataset& data, Index j) {
  return data.feature_names.empty() ? "x" + std::to_string(j + 1) : data.feature_names[static_cast<std::size_t>(j)];
}

/// grid_size evenly spaced points over the feature's observed range; a
/// single point when the feature is constant.
inline std::vector<double> feature_grid(const Dataset& data, Index feature, Index grid_size) {
  if (grid_size < 1) throw ConfigError("grid size must be >= 1");
  const double lo = data.X.col(feature).minCoeff();
  const double hi = data.X.col(feature).maxCoeff();
  if (!(hi > lo)) {
    warn("feature " + feature_name(data, feature) + " is constant; curve has a single point");
    return {lo};
  }
  if (grid_size == 1) return {0.5 * (lo + hi)};
  std::vector<double> grid(static_cast<std::size_t>(grid_size));
  for (Index g = 0; g < grid_size; ++g) {
    grid[static_cast<std::size_t>(g)] = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_size - 1);
  }
  grid.back() = hi;
  return grid;
}

/// Seeded subsample of row indices without replacement, in ascending order;
/// all rows when the subsample is at least the row count.
inline std::vector<Index> subsample_rows(Index rows, Index subsample, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(rows));
  std::iota(idx.begin(), idx.end(), Index{0});
  if (subsample <= 0 || subsample >= rows) return idx;
  Rng rng = make_rng(seed, stream::kSubsample);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(subsample));
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// rows x grid matrix of predictions with `feature` overwritten by each
/// grid value.
template <class Predictor>
Matrix ice_matrix(const Predictor& f, const Matrix& rows, Index feature, const std::vector<double>& grid) {
  const Index n = rows.rows();
  const auto g = static_cast<Index>(grid.size());
  Matrix batch(n * g, rows.cols());
  for (Index a = 0; a < g; ++a) {
    batch.middleRows(a * n, n) = rows;
    batch.col(feature).segment(a * n, n).setConstant(grid[static_cast<std::size_t>(a)]);
  }
  const Vector pred = f(batch);
  Matrix out(n, g);
  for (Index a = 0; a < g; ++a) out.col(a) = pred.segment(a * n, n);
  return out;
}

}  // namespace detail

/// ICE curve of one observation.
template <class Predictor>
Curve ice(const Predictor& f, const Dataset& data, Index row, Index feature, Index grid_size = kDefaultGridSize) {
  detail::check_feature(data, feature);
  if (row < 0 || row >= data.rows()) throw ConfigError("ICE anchor row " + std::to_string(row) + " out of range");
  Curve c;
  c.feature = detail::feature_name(data, feature);
  c.feature_index = feature;
  c.grid = detail::feature_grid(data, feature, grid_size);
  c.ice = detail::ice_matrix(f, data.X.row(row), feature, c.grid);
  c.values = c.ice.row(0).transpose();
  c.anchor_row = row;
  return c;
}

/// Uniform seeded anchor row for an ICE plot.
inline Index random_anchor_row(const Dataset& data, std::uint64_t seed) {
  if (data.rows() < 1) throw DataError("dataset has no rows");
  Rng rng = make_rng(seed, stream::kAnchor);
  std::uniform_int_distribution<Index> pick(0, data.rows() - 1);
  return pick(rng);
}

/// One-dimensional partial dependence: the mean of ICE curves over a seeded
/// row subsample. `ice` holds every contributing curve.
template <class Predictor>
Curve pdp1(const Predictor& f, const Dataset& data, Index feature, Index grid_size = kDefaultGridSize,
           Index subsample = kDefaultPdSubsample, std::uint64_t seed = 0) {
  detail::check_feature(data, feature);
  Curve c;
  c.feature = detail::feature_name(data, feature);
  c.feature_index = feature;
  c.grid = detail::feature_grid(data, feature, grid_size);
  const auto rows = detail::subsample_rows(data.rows(), subsample, seed);
  c.ice = detail::ice_matrix(f, data.X(rows, Eigen::all), feature, c.grid);
  c.values = c.ice.colwise().mean().transpose();
  return c;
}

/// Two-dimensional partial dependence over a grid_size x grid_size lattice.
template <class Predictor>
Surface pdp2(const Predictor& f, const Dataset& data, Index j, Index k, Index grid_size = kDefaultGridSize,
             Index subsample = kDefaultPdSubsample, std::uint64_t seed = 0) {
  detail::check_feature(data, j);
  detail::check_feature(data, k);
  if (j == k) throw ConfigError("pdp2 needs two distinct features");
  Surface s;
  s.feature_j = detail::feature_name(data, j);
  s.feature_k = detail::feature_name(data, k);
  s.grid_j = detail::feature_grid(data, j, grid_size);
  s.grid_k = detail::feature_grid(data, k, grid_size);
  const auto rows = detail::subsample_rows(data.rows(), subsample, seed);
  Matrix base = data.X(rows, Eigen::all);
  s.values.resize(static_cast<Index>(s.grid_j.size()), static_cast<Index>(s.grid_k.size()));
  for (std::size_t a = 0; a < s.grid_j.size(); ++a) {
    base.col(j).setConstant(s.grid_j[a]);
    const Matrix m = detail::ice_matrix(f, base, k, s.grid_k);
    s.values.row(static_cast<Index>(a)) = m.colwise().mean();
  }
  return s;
}

/// Rows used to score importance: test split, else validation, else all.
inline std::vector<Index> evaluation_rows(const Dataset& data) {
  for (Split s : {Split::kTest, Split::kValidation}) {
    auto idx = data.indices(s);
    if (!idx.empty()) return idx;
  }
  std::vector<Index> all(static_cast<std::size_t>(data.rows()));
  std::iota(all.begin(), all.end(), Index{0});
  return all;
}

/// Average metric degradation when one column is permuted, oriented so that
/// larger means more important (MSE/logloss increase, AUC decrease).
template <class Predictor>
ImportanceTable permutation_importance(const Predictor& f, const Dataset& data, Metric metric, Index repeats = 5,
                                       std::uint64_t seed = 0, const std::vector<Index>* rows = nullptr) {
  if (repeats < 1) throw ConfigError("permutation importance needs repeats >= 1");
  if (metric != Metric::kMse && data.kind == ResponseKind::kContinuous) {
    throw ConfigError("metric " + std::string(to_string(metric)) + " needs a binary response");
  }
  const std::vector<Index> eval = rows ? *rows : evaluation_rows(data);
  const Matrix X = data.X(eval, Eigen::all);
  const Vector y = data.y(eval);
  ImportanceTable t;
  t.metric = metric;
  t.repeats = repeats;
  t.seed = seed;
  t.baseline = evaluate(metric, y, f(X));
  const double sign = higher_is_better(metric) ? -1.0 : 1.0;
  std::vector<Index> perm(static_cast<std::size_t>(X.rows()));
  for (Index j = 0; j < X.cols(); ++j) {
    double total = 0.0;
    for (Index r = 0; r < repeats; ++r) {
      std::iota(perm.begin(), perm.end(), Index{0});
      Rng rng(derive_seed(seed, stream::kPermute, static_cast<std::uint64_t>(j * repeats + r)));
      std::shuffle(perm.begin(), perm.end(), rng);
      Matrix Xp = X;
      for (Index i = 0; i < X.rows(); ++i) Xp(i, j) = X(perm[static_cast<std::size_t>(i)], j);
      total += sign * (evaluate(metric, y, f(Xp)) - t.baseline);
    }
    t.features.push_back(detail::feature_name(data, j));
    t.importance.push_back(total / static_cast<double>(repeats));
  }
  return t;
}

/// Friedman-Popescu H^2 for a feature pair:
///   sum_i [PD_jk(x_i) - PD_j(x_i) - PD_k(x_i)]^2 / sum_i PD_jk(x_i)^2
/// with every partial dependence mean-centered over the subsample.
template <class Predictor>
HStat h_statistic(const Predictor& f, const Dataset& data, Index j, Index k, Index subsample = kDefaultHSubsample,
                  std::uint64_t seed = 0) {
  detail::check_feature(data, j);
  detail::check_feature(data, k);
  if (j == k) throw ConfigError("h_statistic needs two distinct features");
  const auto rows = detail::subsample_rows(data.rows(), subsample, seed);
  const Matrix S = data.X(rows, Eigen::all);
  const Index n = S.rows();

  auto partial_dependence = [&](const std::vector<Index>& cols) {
    Vector pd(n);
    Matrix batch(n, S.cols());
    for (Index i = 0; i < n; ++i) {
      batch = S;
      for (Index c : cols) batch.col(c).setConstant(S(i, c));
      pd[i] = f(batch).mean();
    }
    return Vector(pd.array() - pd.mean());
  };
  // Columns are set in ascending index order so (j, k) and (k, j) evaluate
  // identical batches.
  const Vector pd_jk = partial_dependence({std::min(j, k), std::max(j, k)});
  const Vector pd_j = partial_dependence({j});
  const Vector pd_k = partial_dependence({k});
  const Vector additive = pd_j + pd_k;
  const double num = (pd_jk - additive).squaredNorm();
  const double den = pd_jk.squaredNorm();
  HStat h{j, k, 0.0, n};
  if (!(den > 0.0)) {
    warn("H-statistic: joint partial dependence is constant; reporting 0");
    return h;
  }
  h.h2 = std::clamp(num / den, 0.0, 1.0);
  return h;
}

/// H^2 for every pair drawn from `features`, sorted by decreasing value.
template <class Predictor>
std::vector<HStat> h_statistic_pairs(const Predictor& f, const Dataset& data, const std::vector<Index>& features,
                                     Index subsample = kDefaultHSubsample, std::uint64_t seed = 0) {
  std::vector<HStat> out;
  for (std::size_t a = 0; a < features.size(); ++a) {
    for (std::size_t b = a + 1; b < features.size(); ++b) {
      out.push_back(h_statistic(f, data, features[a], features[b], subsample, seed));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const HStat& x, const HStat& y) { return x.h2 > y.h2; });
  return out;
}

inline void write_curve_csv(const Curve& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "grid,value\n";
  for (std::size_t g = 0; g < c.grid.size(); ++g) {
    out << format_real(c.grid[g]) << ',' << format_real(c.values[static_cast<Index>(g)]) << '\n';
  }
}

/// Long format: one line per (observation, grid point).
inline void write_ice_csv(const Curve& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "curve,grid,value\n";
  for (Index r = 0; r < c.ice.rows(); ++r) {
    for (std::size_t g = 0; g < c.grid.size(); ++g) {
      out << r << ',' << format_real(c.grid[g]) << ',' << format_real(c.ice(r, static_cast<Index>(g))) << '\n';
    }
  }
}

inline void write_surface_csv(const Surface& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << s.feature_j << ',' << s.feature_k << ",value\n";
  for (std::size_t a = 0; a < s.grid_j.size(); ++a) {
    for (std::size_t b = 0; b < s.grid_k.size(); ++b) {
      out << format_real(s.grid_j[a]) << ',' << format_real(s.grid_k[b]) << ','
          << format_real(s.values(static_cast<Index>(a), static_cast<Index>(b))) << '\n';
    }
  }
}

inline void write_importance_csv(const ImportanceTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "feature,score\n";
  for (std::size_t i = 0; i < t.features.size(); ++i) out << t.features[i] << ',' << format_real(t.importance[i]) << '\n';
}

inline void write_hstat_csv(const std::vector<HStat>& hs, const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "feature_j,feature_k,h2,subsample\n";
  for (const auto& h : hs) {
    out << detail::feature_name(data, h.j) << ',' << detail::feature_name(data, h.k) << ',' << format_real(h.h2) << ','
        << h.subsample << '\n';
  }
}

}  // namespace csn
