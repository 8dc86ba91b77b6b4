// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Mini-batch ADAM fitting with per-epoch learning-rate decay and early
/// stopping on the validation loss.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "csn/dataset.hpp"
#include "csn/error.hpp"
#include "csn/metrics.hpp"
#include "csn/model.hpp"
#include "csn/nncore.hpp"
#include "csn/random.hpp"

namespace csn {

struct TrainConfig {
  Loss loss = Loss::kMse;
  TrainingOptions options;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const { options.validate(); }
};

/// Objective and optimizer settings carried by the model's own config.
inline TrainConfig train_config_for(const Model& model) {
  TrainConfig c;
  c.loss = default_loss(model.head);
  c.options = model.training();
  return c;
}

struct FitHistory {
  std::vector<double> train_loss;  // mean batch loss, one entry per epoch
  std::vector<double> val_loss;
  int best_epoch = 0;     // 1-based; 0 when no epoch finished
  int stopped_epoch = 0;  // last epoch run
  bool restored_best = false;

  int epochs() const { return static_cast<int>(val_loss.size()); }

  friend bool operator==(const FitHistory&, const FitHistory&) = default;
};

/// Tracks the best validation loss. Improvement means strictly lower.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("patience must be >= 1");
  }

  /// Records epoch (1-based); returns true when it is the new best.
  bool observe(int epoch, double loss) {
    if (loss < best_loss_) {
      best_loss_ = loss;
      best_epoch_ = epoch;
      return true;
    }
    return false;
  }

  bool should_stop(int epoch) const { return best_epoch_ > 0 && epoch - best_epoch_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct FitResult {
  Model model;
  FitHistory history;
  std::optional<std::string> failure;  // set when training aborted
};

/// Batch size for a training split: ceil(batch_fraction * n_train).
inline Index batch_size_for(Index n_train, double batch_fraction) {
  const auto b = static_cast<Index>(std::ceil(batch_fraction * static_cast<double>(n_train) - 1e-9));
  return std::clamp<Index>(b, 1, std::max<Index>(n_train, 1));
}

/// Trains `model` on the train split and early-stops on the validation split.
/// Epoch e (0-based) runs at lr * decay^e over a fresh shuffle seeded from
/// (seed, e); the parameters of the best epoch are restored at the end.
inline FitResult fit(Model model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  const Matrix Xtr = data.features_of(Split::kTrain);
  const Vector ytr = data.response_of(Split::kTrain);
  const Matrix Xva = data.features_of(Split::kValidation);
  const Vector yva = data.response_of(Split::kValidation);
  if (Xtr.rows() == 0) throw DataError("fit: training split is empty");
  if (Xva.rows() == 0) throw DataError("fit: validation split is empty");
  if (Xtr.cols() != model.features()) {
    throw ConfigError("fit: model expects " + std::to_string(model.features()) + " features, data has " +
                      std::to_string(Xtr.cols()));
  }

  const TrainingOptions& opt = cfg.options;
  AdamOptions ao;
  ao.learning_rate = opt.lr;
  ao.decay = opt.decay;
  ao.beta1 = cfg.beta1;
  ao.beta2 = cfg.beta2;
  ao.epsilon = cfg.epsilon;

  FitResult result{model, {}, std::nullopt};
  Vector params = pack_parameters(model);
  Vector best_params = params;
  AdamState state(params.size(), ao);
  EarlyStopping stopper(opt.patience);
  const Index n = Xtr.rows();
  const Index batch = batch_size_for(n, opt.batch_fraction);
  std::vector<Index> order(static_cast<std::size_t>(n));

  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(derive_seed(opt.seed, stream::kShuffle, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    state.lr = state.scheduled_rate(epoch);
    double loss_sum = 0.0;
    try {
      for (Index start = 0; start < n; start += batch) {
        const Index len = std::min(batch, n - start);
        std::vector<Index> rows(order.begin() + start, order.begin() + start + len);
        const Matrix Xb = Xtr(rows, Eigen::all);
        const Vector yb = ytr(rows);
        const LossGradient lg = loss_and_gradient(model, Xb, yb, cfg.loss);
        AdamResult step = adam_update(params, lg.gradient, state);
        params = std::move(step.params);
        state = std::move(step.state);
        unpack_parameters(model, params);
        loss_sum += lg.loss * static_cast<double>(len);
      }
      const double val = mean_loss(model, Xva, yva, cfg.loss);
      if (!std::isfinite(val)) throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch + 1));
      result.history.train_loss.push_back(loss_sum / static_cast<double>(n));
      result.history.val_loss.push_back(val);
      result.history.stopped_epoch = epoch + 1;
      if (stopper.observe(epoch + 1, val)) best_params = params;
      if (stopper.should_stop(epoch + 1)) break;
    } catch (const NumericError& e) {
      result.failure = "epoch " + std::to_string(epoch + 1) + ": " + e.what();
      break;
    }
  }
  result.history.best_epoch = stopper.best_epoch();
  if (stopper.best_epoch() > 0) {
    unpack_parameters(model, best_params);
    result.history.restored_best = true;
  }
  result.model = std::move(model);
  return result;
}

inline FitResult fit(const Model& model, const Dataset& data) { return fit(model, data, train_config_for(model)); }

/// Metrics of a fitted model on one split.
struct SplitMetrics {
  double loss = std::numeric_limits<double>::quiet_NaN();  // training objective
  double mse = std::numeric_limits<double>::quiet_NaN();
  double auc = std::numeric_limits<double>::quiet_NaN();   // binary only
  Index rows = 0;
};

inline SplitMetrics evaluate_split(const Model& model, const Dataset& data, Split split) {
  SplitMetrics m;
  const Matrix X = data.features_of(split);
  if (X.rows() == 0) return m;
  const Vector y = data.response_of(split);
  const Vector score = predict_score(model, X);
  const Vector pred = link(model.head, score);
  m.rows = X.rows();
  m.loss = loss_from_scores(model.head, default_loss(model.head), score, y);
  m.mse = mse(y, pred);
  if (data.kind == ResponseKind::kBinary) {
    try {
      m.auc = auc(y, pred);
    } catch (const MetricError&) {
    }
  }
  return m;
}

}  // namespace csn
