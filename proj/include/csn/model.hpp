// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Cross spline networks and the dense (FCNN) baseline: construction,
/// prediction, exact gradients and flat-parameter packing.
///
/// CSN layer chain:
///   standardize -> spline (p -> w) -> affine (w -> d) -> k x cross (d -> d)
///   -> affine (d -> 1) [-> sigmoid for the binary head]

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "csn/error.hpp"
#include "csn/linalg.hpp"
#include "csn/nncore.hpp"
#include "csn/random.hpp"
#include "csn/spline.hpp"

namespace csn {

enum class Head { kRegression, kBinary };
enum class Loss { kMse, kLogLoss };

inline std::string_view to_string(Head h) { return h == Head::kBinary ? "binary" : "regression"; }
inline std::string_view to_string(Loss l) { return l == Loss::kLogLoss ? "logloss" : "mse"; }

inline Head parse_head(std::string_view s) {
  if (s == "regression") return Head::kRegression;
  if (s == "binary") return Head::kBinary;
  throw ConfigError("unknown head '" + std::string(s) + "' (expected regression or binary)");
}

/// Training objective that matches a head.
inline Loss default_loss(Head h) { return h == Head::kBinary ? Loss::kLogLoss : Loss::kMse; }

/// Optimizer and early-stopping settings shared by every network family.
struct TrainingOptions {
  double lr = 0.02;
  double batch_fraction = 0.01;
  double decay = 0.995;
  int patience = 50;
  int max_epochs = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(batch_fraction > 0.0 && batch_fraction <= 1.0)) throw ConfigError("batch_fraction must lie in (0, 1]");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  }

  friend bool operator==(const TrainingOptions&, const TrainingOptions&) = default;
};

struct CsnConfig {
  BasisKind basis = BasisKind::sigmoid_trainable();
  Index m = 5;
  Index d = 20;
  Index k = 2;
  Head head = Head::kRegression;
  TrainingOptions train;

  void validate() const {
    basis.validate();
    if (m < 1) throw ConfigError("m (bases per feature) must be >= 1, got " + std::to_string(m));
    if (d < 1) throw ConfigError("d (projection width) must be >= 1, got " + std::to_string(d));
    if (k < 0) throw ConfigError("k (cross layers) must be >= 0, got " + std::to_string(k));
    train.validate();
  }

  friend bool operator==(const CsnConfig&, const CsnConfig&) = default;
};

struct FcnnConfig {
  std::vector<Index> hidden{20, 10, 5};
  Head head = Head::kRegression;
  TrainingOptions train;

  void validate() const {
    if (hidden.empty()) throw ConfigError("FCNN needs at least one hidden layer");
    for (Index w : hidden) {
      if (w < 1) throw ConfigError("FCNN hidden widths must be positive");
    }
    train.validate();
  }

  friend bool operator==(const FcnnConfig&, const FcnnConfig&) = default;
};

/// Defaults used without tuning: k = 2, m = 5, d = 20, lr = 0.02, batches of
/// 1% of the training rows, decay 0.995 per epoch, early stopping with
/// patience 50.
inline CsnConfig treenet2_config(Index /*p*/ = 30) {
  CsnConfig c;
  c.basis = BasisKind::sigmoid_trainable();
  c.m = 5;
  c.d = 20;
  c.k = 2;
  c.train.lr = 0.02;
  c.train.batch_fraction = 0.01;
  c.train.decay = 0.995;
  c.train.patience = 50;
  c.train.max_epochs = 1000;
  return c;
}

/// Affine input standardization (x - mean) / scale fitted on training rows.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer identity(Index p) { return {Vector::Zero(p), Vector::Ones(p)}; }

  Matrix apply(const Matrix& X) const {
    if (X.cols() != mean.size()) {
      throw ConfigError("standardizer expects " + std::to_string(mean.size()) + " features, got input " + shape_of(X));
    }
    Matrix Z = X;
    Z.rowwise() -= mean.transpose();
    Z.array().rowwise() /= scale.transpose().array();
    return Z;
  }
};

/// Statistics of the training split needed to build a model.
struct TrainingStats {
  Standardizer standardizer;
  FeatureStats standardized;  // stats of the standardized training matrix
};

inline TrainingStats compute_training_stats(const Matrix& X_train) {
  if (X_train.rows() < 1) throw DataError("training split is empty");
  const FeatureStats raw = compute_feature_stats(X_train);
  TrainingStats ts;
  const Index p = X_train.cols();
  ts.standardizer.mean.resize(p);
  ts.standardizer.scale.resize(p);
  for (Index j = 0; j < p; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    ts.standardizer.mean[j] = raw.mean[jj];
    ts.standardizer.scale[j] = raw.sd[jj] > 0.0 ? raw.sd[jj] : 1.0;
  }
  ts.standardized = compute_feature_stats(ts.standardizer.apply(X_train));
  return ts;
}

struct CsnNet {
  CsnConfig config;
  SplineParams spline;
  AffineParams projection;
  std::vector<CrossParams> cross;
  AffineParams head;
};

struct FcnnNet {
  FcnnConfig config;
  std::vector<AffineParams> hidden;
  AffineParams head;
};

struct Model {
  std::variant<CsnNet, FcnnNet> net;
  Head head = Head::kRegression;
  Standardizer input;
  std::vector<std::string> feature_names;

  bool is_csn() const { return std::holds_alternative<CsnNet>(net); }
  const CsnNet& csn() const { return std::get<CsnNet>(net); }
  CsnNet& csn() { return std::get<CsnNet>(net); }
  const FcnnNet& fcnn() const { return std::get<FcnnNet>(net); }
  FcnnNet& fcnn() { return std::get<FcnnNet>(net); }
  Index features() const { return input.mean.size(); }

  const TrainingOptions& training() const {
    return is_csn() ? csn().config.train : fcnn().config.train;
  }
};

inline std::vector<std::string> default_feature_names(Index p) {
  std::vector<std::string> names;
  for (Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

inline Model build_csn(const CsnConfig& config, const TrainingStats& stats,
                       std::vector<std::string> feature_names = {}) {
  config.validate();
  const Index p = stats.standardized.features();
  if (p < 1) throw ConfigError("build_csn: training stats describe no features");
  if (stats.standardizer.mean.size() != p) throw ConfigError("build_csn: standardizer and feature stats disagree");
  if (!feature_names.empty() && static_cast<Index>(feature_names.size()) != p) {
    throw ConfigError("build_csn: " + std::to_string(feature_names.size()) + " feature names for " +
                      std::to_string(p) + " features");
  }
  CsnNet net;
  net.config = config;
  net.spline = init_bases(stats.standardized, config.m, config.basis, config.train.seed);
  const Index width = basis_width(config.basis, config.m, p);
  Rng rng = make_rng(config.train.seed, stream::kInit + 100);
  net.projection = AffineParams(config.d, width);
  init_glorot(net.projection, rng);
  for (Index l = 0; l < config.k; ++l) {
    CrossParams c(config.d);
    init_glorot(c, rng);
    net.cross.push_back(std::move(c));
  }
  net.head = AffineParams(1, config.d);
  init_glorot(net.head, rng);
  Model model;
  model.net = std::move(net);
  model.head = config.head;
  model.input = stats.standardizer;
  model.feature_names = feature_names.empty() ? default_feature_names(p) : std::move(feature_names);
  return model;
}

/// Dense ReLU network baseline. Without stats the inputs are used as given.
inline Model build_fcnn(const FcnnConfig& config, Index p, const Standardizer* standardizer = nullptr,
                        std::vector<std::string> feature_names = {}) {
  config.validate();
  if (p < 1) throw ConfigError("build_fcnn: p must be >= 1");
  FcnnNet net;
  net.config = config;
  Rng rng = make_rng(config.train.seed, stream::kInit + 200);
  Index in = p;
  for (Index w : config.hidden) {
    AffineParams a(w, in);
    init_glorot(a, rng);
    net.hidden.push_back(std::move(a));
    in = w;
  }
  net.head = AffineParams(1, in);
  init_glorot(net.head, rng);
  Model model;
  model.net = std::move(net);
  model.head = config.head;
  model.input = standardizer ? *standardizer : Standardizer::identity(p);
  model.feature_names = feature_names.empty() ? default_feature_names(p) : std::move(feature_names);
  return model;
}

namespace detail {

/// Visits every parameter block in the canonical flat order, calling
/// f(pointer, length, trainable).
template <class ModelT, class F>
void visit_parameter_blocks(ModelT& model, F&& f) {
  using Net = std::conditional_t<std::is_const_v<ModelT>, const CsnNet, CsnNet>;
  using Dense = std::conditional_t<std::is_const_v<ModelT>, const FcnnNet, FcnnNet>;
  if (model.is_csn()) {
    Net& net = std::get<CsnNet>(model.net);
    const bool beta = beta_trainable(net.config.basis);
    f(net.spline.alpha.data(), net.spline.alpha.size(), true);
    f(net.spline.beta.data(), net.spline.beta.size(), beta);
    f(net.spline.projection.data(), net.spline.projection.size(), true);
    f(net.projection.W.data(), net.projection.W.size(), true);
    f(net.projection.b.data(), net.projection.b.size(), true);
    for (auto& c : net.cross) {
      f(c.W.data(), c.W.size(), true);
      f(c.b.data(), c.b.size(), true);
    }
    f(net.head.W.data(), net.head.W.size(), true);
    f(net.head.b.data(), net.head.b.size(), true);
  } else {
    Dense& net = std::get<FcnnNet>(model.net);
    for (auto& a : net.hidden) {
      f(a.W.data(), a.W.size(), true);
      f(a.b.data(), a.b.size(), true);
    }
    f(net.head.W.data(), net.head.W.size(), true);
    f(net.head.b.data(), net.head.b.size(), true);
  }
}

}  // namespace detail

/// Total number of parameters, frozen ones included.
inline Index parameter_count(const Model& model) {
  Index n = 0;
  detail::visit_parameter_blocks(model, [&](const double*, Index len, bool) { n += len; });
  return n;
}

inline Index trainable_count(const Model& model) {
  Index n = 0;
  detail::visit_parameter_blocks(model, [&](const double*, Index len, bool t) { n += t ? len : 0; });
  return n;
}

inline Vector pack_parameters(const Model& model) {
  Vector flat(parameter_count(model));
  Index pos = 0;
  detail::visit_parameter_blocks(model, [&](const double* data, Index len, bool) {
    std::copy(data, data + len, flat.data() + pos);
    pos += len;
  });
  return flat;
}

inline void unpack_parameters(Model& model, const Vector& flat) {
  const Index expected = parameter_count(model);
  if (flat.size() != expected) {
    throw ConfigError("unpack_parameters: expected " + std::to_string(expected) + " values, got " +
                      std::to_string(flat.size()));
  }
  Index pos = 0;
  detail::visit_parameter_blocks(model, [&](double* data, Index len, bool) {
    std::copy(flat.data() + pos, flat.data() + pos + len, data);
    pos += len;
  });
}

/// 1 for trainable entries of the flat vector, 0 for frozen ones.
inline Vector trainable_mask(const Model& model) {
  Vector mask(parameter_count(model));
  Index pos = 0;
  detail::visit_parameter_blocks(model, [&](const double*, Index len, bool t) {
    mask.segment(pos, len).setConstant(t ? 1.0 : 0.0);
    pos += len;
  });
  return mask;
}

/// Intermediate activations of one forward pass.
struct ForwardTrace {
  Matrix standardized;
  SplineTrace spline;
  Matrix h0;                  // projection output, x0 of the cross stack
  std::vector<Matrix> layers;  // x_0 .. x_k (CSN) or hidden activations (FCNN)
  std::vector<Matrix> pre;     // FCNN pre-activations
  Vector score;                // head output before any link
};

inline ForwardTrace forward_trace(const Model& model, const Matrix& X) {
  if (X.cols() != model.features()) {
    throw ConfigError("model expects " + std::to_string(model.features()) + " features, got input " + shape_of(X));
  }
  ForwardTrace t;
  t.standardized = model.input.apply(X);
  if (model.is_csn()) {
    const CsnNet& net = model.csn();
    t.spline = spline_trace(t.standardized, net.spline, net.config.basis);
    t.h0 = affine(t.spline.out, net.projection);
    t.layers.push_back(t.h0);
    for (const auto& c : net.cross) t.layers.push_back(cross_layer(t.h0, t.layers.back(), c));
    t.score = affine(t.layers.back(), net.head).col(0);
  } else {
    const FcnnNet& net = model.fcnn();
    if (!all_finite(t.standardized)) throw DataError("FCNN: non-finite input");
    Matrix h = t.standardized;
    for (const auto& a : net.hidden) {
      Matrix z = affine(h, a);
      h = activation(Activation::kRelu, z);
      t.pre.push_back(std::move(z));
      t.layers.push_back(h);
    }
    t.score = affine(h, net.head).col(0);
  }
  return t;
}

inline Vector link(Head head, const Vector& score) {
  if (head == Head::kRegression) return score;
  return score.unaryExpr([](double s) { return sigmoid(s); });
}

/// Raw head output (logit for the binary head).
inline Vector predict_score(const Model& model, const Matrix& X) {
  constexpr Index kChunk = 4096;
  if (X.rows() <= kChunk) return forward_trace(model, X).score;
  Vector out(X.rows());
  for (Index start = 0; start < X.rows(); start += kChunk) {
    const Index len = std::min(kChunk, X.rows() - start);
    out.segment(start, len) = forward_trace(model, X.middleRows(start, len)).score;
  }
  return out;
}

/// Raw scores for the regression head, probabilities for the binary head.
inline Vector predict(const Model& model, const Matrix& X) { return link(model.head, predict_score(model, X)); }

/// log(1 + e^s) without overflow.
inline double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

/// Mean loss over rows given raw scores. Log-loss is evaluated on the logit
/// (softplus form), so it stays finite for saturated probabilities.
inline double loss_from_scores(Head head, Loss loss, const Vector& score, const Vector& y) {
  if (loss == Loss::kLogLoss && head != Head::kBinary) throw ConfigError("logloss needs the binary head");
  if (score.size() != y.size()) throw ConfigError("loss: prediction/target length mismatch");
  if (y.size() == 0) throw DataError("loss: empty batch");
  double total = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    if (loss == Loss::kLogLoss) {
      total += softplus(score[i]) - y[i] * score[i];
    } else {
      const double pred = head == Head::kBinary ? sigmoid(score[i]) : score[i];
      total += (pred - y[i]) * (pred - y[i]);
    }
  }
  return total / static_cast<double>(y.size());
}

inline double mean_loss(const Model& model, const Matrix& X, const Vector& y, Loss loss) {
  return loss_from_scores(model.head, loss, predict_score(model, X), y);
}

struct LossGradient {
  double loss = 0.0;
  Vector gradient;  // flat, canonical order; frozen entries are zero
};

/// Exact gradient of the mean batch loss with respect to every parameter.
inline LossGradient loss_and_gradient(const Model& model, const Matrix& X, const Vector& y, Loss loss) {
  if (X.rows() == 0) throw DataError("gradients: empty batch");
  if (X.rows() != y.size()) throw ConfigError("gradients: " + std::to_string(X.rows()) + " rows but " +
                                              std::to_string(y.size()) + " targets");
  const ForwardTrace t = forward_trace(model, X);
  LossGradient out;
  out.loss = loss_from_scores(model.head, loss, t.score, y);
  if (!std::isfinite(out.loss)) {
    Index bad = 0;
    for (Index i = 0; i < t.score.size(); ++i) bad += std::isfinite(t.score[i]) ? 0 : 1;
    throw NumericError("non-finite loss on a batch of " + std::to_string(X.rows()) + " rows (" + std::to_string(bad) +
                       " non-finite scores)");
  }
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  Matrix dscore(X.rows(), 1);
  for (Index i = 0; i < X.rows(); ++i) {
    const double s = t.score[i];
    if (loss == Loss::kLogLoss) {
      dscore(i, 0) = (sigmoid(s) - y[i]) * inv_n;
    } else if (model.head == Head::kBinary) {
      const double pr = sigmoid(s);
      dscore(i, 0) = 2.0 * (pr - y[i]) * pr * (1.0 - pr) * inv_n;
    } else {
      dscore(i, 0) = 2.0 * (s - y[i]) * inv_n;
    }
  }

  Model g = model;
  if (model.is_csn()) {
    const CsnNet& net = model.csn();
    CsnNet& gn = g.csn();
    const AffineGrad hg = affine_backward(t.layers.back(), net.head, dscore);
    gn.head.W = hg.dW;
    gn.head.b = hg.db;
    Matrix dx = hg.dX;
    Matrix dh0 = Matrix::Zero(t.h0.rows(), t.h0.cols());
    for (Index l = static_cast<Index>(net.cross.size()) - 1; l >= 0; --l) {
      const auto ul = static_cast<std::size_t>(l);
      CrossGrad cg = cross_backward(t.h0, t.layers[ul], net.cross[ul], dx);
      dh0 += cg.dx0;
      dx = std::move(cg.dxl);
      gn.cross[ul].W = cg.dW;
      gn.cross[ul].b = cg.db;
    }
    dh0 += dx;
    const AffineGrad pg = affine_backward(t.spline.out, net.projection, dh0);
    gn.projection.W = pg.dW;
    gn.projection.b = pg.db;
    const SplineGrad sg = spline_backward(t.standardized, net.spline, net.config.basis, t.spline, pg.dX);
    gn.spline.alpha = sg.dalpha;
    gn.spline.beta = sg.dbeta;
    gn.spline.projection = sg.dprojection;
  } else {
    const FcnnNet& net = model.fcnn();
    FcnnNet& gn = g.fcnn();
    const Matrix& last = t.layers.back();
    const AffineGrad hg = affine_backward(last, net.head, dscore);
    gn.head.W = hg.dW;
    gn.head.b = hg.db;
    Matrix dh = hg.dX;
    for (Index l = static_cast<Index>(net.hidden.size()) - 1; l >= 0; --l) {
      const auto ul = static_cast<std::size_t>(l);
      const Matrix dz = (dh.array() * (t.pre[ul].array() > 0.0).cast<double>()).matrix();
      const Matrix& in = l == 0 ? t.standardized : t.layers[ul - 1];
      const AffineGrad ag = affine_backward(in, net.hidden[ul], dz);
      gn.hidden[ul].W = ag.dW;
      gn.hidden[ul].b = ag.db;
      dh = ag.dX;
    }
  }
  out.gradient = pack_parameters(g);
  out.gradient.array() *= trainable_mask(model).array();
  return out;
}

inline Vector gradients(const Model& model, const Matrix& X, const Vector& y, Loss loss) {
  return loss_and_gradient(model, X, y, loss).gradient;
}

}  // namespace csn
