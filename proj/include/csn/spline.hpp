// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Per-feature basis expansions (the spline layer) and their data-driven
/// initialization.
///
/// Output column order is feature-major, then basis index:
///   sigmoid kinds   col = j * m + i
///   hinge           col = (j * m + i) * 2 + s, s = 0 for (x - c)+, 1 for (c - x)+
///   identity        col = j
///   oblique         col = r * m + i, r indexing the projection direction

#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "csn/error.hpp"
#include "csn/linalg.hpp"
#include "csn/log.hpp"
#include "csn/nncore.hpp"
#include "csn/random.hpp"

namespace csn {

struct BasisKind {
  enum class Type { kSigmoidTrainable, kSigmoidFixed, kHinge, kIdentity, kObliqueSigmoid };

  Type type = Type::kSigmoidTrainable;
  double slope = 20.0;  // kSigmoidFixed only
  int projections = 1;  // kObliqueSigmoid only

  static BasisKind sigmoid_trainable() { return {Type::kSigmoidTrainable, 20.0, 1}; }
  static BasisKind sigmoid_fixed(double slope) { return {Type::kSigmoidFixed, slope, 1}; }
  static BasisKind hinge() { return {Type::kHinge, 20.0, 1}; }
  static BasisKind identity() { return {Type::kIdentity, 20.0, 1}; }
  static BasisKind oblique_sigmoid(int q) { return {Type::kObliqueSigmoid, 20.0, q}; }

  bool is_sigmoid() const { return type != Type::kHinge && type != Type::kIdentity; }

  void validate() const {
    if (type == Type::kSigmoidFixed && !(slope > 0.0)) throw ConfigError("sigmoid_fixed basis needs slope > 0");
    if (type == Type::kObliqueSigmoid && projections < 1) throw ConfigError("oblique basis needs q >= 1");
  }

  friend bool operator==(const BasisKind& a, const BasisKind& b) {
    if (a.type != b.type) return false;
    if (a.type == Type::kSigmoidFixed) return a.slope == b.slope;
    if (a.type == Type::kObliqueSigmoid) return a.projections == b.projections;
    return true;
  }
};

inline std::string_view basis_name(BasisKind::Type t) {
  switch (t) {
    case BasisKind::Type::kSigmoidTrainable: return "sigmoid_trainable";
    case BasisKind::Type::kSigmoidFixed: return "sigmoid_fixed";
    case BasisKind::Type::kHinge: return "hinge";
    case BasisKind::Type::kIdentity: return "identity";
    case BasisKind::Type::kObliqueSigmoid: return "oblique_sigmoid";
  }
  return "?";
}

inline BasisKind::Type parse_basis_type(std::string_view s) {
  for (auto t : {BasisKind::Type::kSigmoidTrainable, BasisKind::Type::kSigmoidFixed, BasisKind::Type::kHinge,
                 BasisKind::Type::kIdentity, BasisKind::Type::kObliqueSigmoid}) {
    if (basis_name(t) == s) return t;
  }
  throw ConfigError("unknown basis kind '" + std::string(s) +
                    "' (expected sigmoid_trainable, sigmoid_fixed, hinge, identity or oblique_sigmoid)");
}

/// Number of spline-layer outputs for p input features and m bases per unit.
inline Index basis_width(const BasisKind& kind, Index m, Index p) {
  switch (kind.type) {
    case BasisKind::Type::kSigmoidTrainable:
    case BasisKind::Type::kSigmoidFixed: return m * p;
    case BasisKind::Type::kHinge: return 2 * m * p;
    case BasisKind::Type::kIdentity: return p;
    case BasisKind::Type::kObliqueSigmoid: return m * kind.projections;
  }
  return 0;
}

/// Basis weights. Rows of alpha/beta index the input unit (feature, or
/// projection direction for the oblique kind); columns index the basis.
/// Hinge bases are relu(+-(alpha + beta x)) with beta frozen at 1, so
/// alpha = -knot.
struct SplineParams {
  Matrix alpha;       // units x m
  Matrix beta;        // units x m
  Matrix projection;  // q x p, oblique only

  Index size() const { return alpha.size() + beta.size() + projection.size(); }
};

inline bool beta_trainable(const BasisKind& kind) {
  return kind.type == BasisKind::Type::kSigmoidTrainable || kind.type == BasisKind::Type::kObliqueSigmoid;
}

/// Per-feature summaries of the (standardized) training split.
struct FeatureStats {
  std::vector<std::vector<double>> sorted;  // each column sorted ascending
  std::vector<double> mean;
  std::vector<double> sd;

  Index features() const { return static_cast<Index>(sorted.size()); }
};

/// Linear-interpolation quantile of a sorted sample, level in [0, 1].
inline double sorted_quantile(const std::vector<double>& sorted, double level) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double h = level * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline FeatureStats compute_feature_stats(const Matrix& X) {
  if (X.rows() == 0) throw DataError("feature statistics need at least one row");
  FeatureStats s;
  const auto n = static_cast<double>(X.rows());
  for (Index j = 0; j < X.cols(); ++j) {
    std::vector<double> col(static_cast<std::size_t>(X.rows()));
    for (Index i = 0; i < X.rows(); ++i) col[static_cast<std::size_t>(i)] = X(i, j);
    const double mean = X.col(j).mean();
    const double ss = (X.col(j).array() - mean).square().sum();
    std::sort(col.begin(), col.end());
    s.sorted.push_back(std::move(col));
    s.mean.push_back(mean);
    s.sd.push_back(X.rows() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0);
  }
  return s;
}

/// Standard normal quantile by bisection on the CDF.
inline double normal_quantile(double level) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < level) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Knots at the interior quantile levels i/(m+1); sigmoid slopes start at
/// 2/sd (trainable) or the fixed slope; alpha = -beta * knot.
inline SplineParams init_bases(const FeatureStats& stats, Index m, const BasisKind& kind, std::uint64_t seed) {
  if (m < 1) throw ConfigError("init_bases: m must be >= 1");
  kind.validate();
  const Index p = stats.features();
  SplineParams sp;
  if (kind.type == BasisKind::Type::kIdentity) {
    sp.alpha.resize(0, 0);
    sp.beta.resize(0, 0);
    return sp;
  }
  if (kind.type == BasisKind::Type::kObliqueSigmoid) {
    const Index q = kind.projections;
    Rng rng = make_rng(seed, stream::kInit);
    std::normal_distribution<double> normal(0.0, 1.0);
    sp.projection.resize(q, p);
    for (Index r = 0; r < q; ++r) {
      for (Index j = 0; j < p; ++j) sp.projection(r, j) = normal(rng);
      const double norm = sp.projection.row(r).norm();
      if (norm > 0.0) sp.projection.row(r) /= norm; else sp.projection(r, 0) = 1.0;
    }
    // Unit directions over standardized features give roughly unit-variance
    // projections, so knots sit at standard normal quantiles.
    sp.alpha.resize(q, m);
    sp.beta.resize(q, m);
    for (Index r = 0; r < q; ++r) {
      for (Index i = 0; i < m; ++i) {
        const double knot = normal_quantile(static_cast<double>(i + 1) / static_cast<double>(m + 1));
        sp.beta(r, i) = 2.0;
        sp.alpha(r, i) = -2.0 * knot;
      }
    }
    return sp;
  }

  sp.alpha.resize(p, m);
  sp.beta.resize(p, m);
  for (Index j = 0; j < p; ++j) {
    const auto& col = stats.sorted[static_cast<std::size_t>(j)];
    const double lo_q = sorted_quantile(col, 1.0 / static_cast<double>(m + 1));
    const double hi_q = sorted_quantile(col, static_cast<double>(m) / static_cast<double>(m + 1));
    const bool degenerate = m > 1 ? !(hi_q > lo_q) : !(col.back() > col.front());
    if (degenerate) warn("feature " + std::to_string(j) + " has zero interquantile range; using a single centered knot");
    const double sd = stats.sd[static_cast<std::size_t>(j)];
    for (Index i = 0; i < m; ++i) {
      const double level = static_cast<double>(i + 1) / static_cast<double>(m + 1);
      const double knot = degenerate ? sorted_quantile(col, 0.5) : sorted_quantile(col, level);
      double slope = 1.0;
      if (kind.type == BasisKind::Type::kSigmoidTrainable) slope = sd > 0.0 ? 2.0 / sd : 2.0;
      if (kind.type == BasisKind::Type::kSigmoidFixed) slope = kind.slope;
      sp.beta(j, i) = slope;
      sp.alpha(j, i) = -slope * knot;
    }
  }
  return sp;
}

inline void check_spline_shapes(const Matrix& X, const SplineParams& sp, const BasisKind& kind) {
  if (kind.type == BasisKind::Type::kIdentity) return;
  if (sp.alpha.rows() != sp.beta.rows() || sp.alpha.cols() != sp.beta.cols()) {
    throw ConfigError("spline: alpha " + shape_of(sp.alpha) + " and beta " + shape_of(sp.beta) + " differ");
  }
  if (kind.type == BasisKind::Type::kObliqueSigmoid) {
    if (sp.projection.cols() != X.cols() || sp.projection.rows() != sp.alpha.rows() ||
        sp.projection.rows() != kind.projections) {
      throw ConfigError("spline: projection " + shape_of(sp.projection) + " incompatible with input " + shape_of(X));
    }
  } else if (sp.alpha.rows() != X.cols()) {
    throw ConfigError("spline: input shape " + shape_of(X) + " but parameters cover " +
                      std::to_string(sp.alpha.rows()) + " features");
  }
}

/// Spline forward pass with the intermediates needed by the backward pass.
struct SplineTrace {
  Matrix units;  // n x units: X itself, or X * projection^T for oblique
  Matrix pre;    // n x width, pre-activation (alpha + beta * unit), sign-folded for hinge
  Matrix out;    // n x width
};

inline SplineTrace spline_trace(const Matrix& X, const SplineParams& sp, const BasisKind& kind) {
  check_spline_shapes(X, sp, kind);
  for (Index r = 0; r < X.rows(); ++r) {
    if (!X.row(r).allFinite()) throw DataError("spline: non-finite input in row " + std::to_string(r));
  }
  SplineTrace t;
  if (kind.type == BasisKind::Type::kIdentity) {
    t.out = X;
    return t;
  }
  t.units = kind.type == BasisKind::Type::kObliqueSigmoid ? Matrix(X * sp.projection.transpose()) : X;
  const Index n = X.rows();
  const Index units = sp.alpha.rows();
  const Index m = sp.alpha.cols();
  if (kind.type == BasisKind::Type::kHinge) {
    t.pre.resize(n, 2 * units * m);
    for (Index r = 0; r < n; ++r) {
      for (Index j = 0; j < units; ++j) {
        const double x = t.units(r, j);
        for (Index i = 0; i < m; ++i) {
          const double z = sp.alpha(j, i) + sp.beta(j, i) * x;
          t.pre(r, (j * m + i) * 2) = z;
          t.pre(r, (j * m + i) * 2 + 1) = -z;
        }
      }
    }
    t.out = t.pre.cwiseMax(0.0);
    return t;
  }
  t.pre.resize(n, units * m);
  for (Index r = 0; r < n; ++r) {
    for (Index j = 0; j < units; ++j) {
      const double x = t.units(r, j);
      for (Index i = 0; i < m; ++i) t.pre(r, j * m + i) = sp.alpha(j, i) + sp.beta(j, i) * x;
    }
  }
  t.out = activation(Activation::kSigmoid, t.pre);
  return t;
}

inline Matrix spline_forward(const Matrix& X, const SplineParams& sp, const BasisKind& kind) {
  return spline_trace(X, sp, kind).out;
}

struct SplineGrad {
  Matrix dalpha;
  Matrix dbeta;  // zero when beta is frozen
  Matrix dprojection;
};

/// Parameter gradients of sum(dOut .* spline_forward(X)).
inline SplineGrad spline_backward(const Matrix& X, const SplineParams& sp, const BasisKind& kind,
                                  const SplineTrace& t, const Matrix& dOut) {
  SplineGrad g;
  g.dalpha = Matrix::Zero(sp.alpha.rows(), sp.alpha.cols());
  g.dbeta = Matrix::Zero(sp.beta.rows(), sp.beta.cols());
  g.dprojection = Matrix::Zero(sp.projection.rows(), sp.projection.cols());
  if (kind.type == BasisKind::Type::kIdentity) return g;
  const Index n = X.rows();
  const Index units = sp.alpha.rows();
  const Index m = sp.alpha.cols();
  const bool train_beta = beta_trainable(kind);
  Matrix dunits = Matrix::Zero(n, units);
  for (Index r = 0; r < n; ++r) {
    for (Index j = 0; j < units; ++j) {
      const double x = t.units(r, j);
      for (Index i = 0; i < m; ++i) {
        double dz;
        if (kind.type == BasisKind::Type::kHinge) {
          const Index c = (j * m + i) * 2;
          dz = (t.pre(r, c) > 0.0 ? dOut(r, c) : 0.0) - (t.pre(r, c + 1) > 0.0 ? dOut(r, c + 1) : 0.0);
        } else {
          const Index c = j * m + i;
          const double a = t.out(r, c);
          dz = dOut(r, c) * a * (1.0 - a);
        }
        g.dalpha(j, i) += dz;
        if (train_beta) g.dbeta(j, i) += dz * x;
        dunits(r, j) += dz * sp.beta(j, i);
      }
    }
  }
  if (kind.type == BasisKind::Type::kObliqueSigmoid) g.dprojection = dunits.transpose() * X;
  return g;
}

}  // namespace csn
