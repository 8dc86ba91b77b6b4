// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Dense layer primitives with analytic forward/backward rules and the ADAM
/// update. Every network in the library is composed from these pieces.

#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "csn/error.hpp"
#include "csn/linalg.hpp"
#include "csn/random.hpp"

namespace csn {

/// y = W x + b for every row x of the input.
struct AffineParams {
  Matrix W;  // out x in
  Vector b;  // out

  AffineParams() = default;
  AffineParams(Index out, Index in) : W(Matrix::Zero(out, in)), b(Vector::Zero(out)) {}

  Index in_dim() const { return W.cols(); }
  Index out_dim() const { return W.rows(); }
  Index size() const { return W.size() + b.size(); }
};

/// Weights of one cross layer: x_{l+1} = x0 .* (W x_l + b) + x_l.
struct CrossParams {
  Matrix W;  // d x d
  Vector b;  // d

  CrossParams() = default;
  explicit CrossParams(Index d) : W(Matrix::Zero(d, d)), b(Vector::Zero(d)) {}

  Index dim() const { return W.rows(); }
  Index size() const { return W.size() + b.size(); }
};

struct AffineGrad {
  Matrix dX;
  Matrix dW;
  Vector db;
};

struct CrossGrad {
  Matrix dx0;
  Matrix dxl;
  Matrix dW;
  Vector db;
};

enum class Activation { kSigmoid, kRelu, kIdentity };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

inline void check_affine_shapes(const Matrix& X, const AffineParams& p) {
  if (p.b.size() != p.W.rows()) {
    throw ConfigError("affine: bias length " + std::to_string(p.b.size()) + " does not match weight shape " +
                      shape_of(p.W));
  }
  if (X.cols() != p.W.cols()) {
    throw ConfigError("affine: input shape " + shape_of(X) + " incompatible with weight shape " + shape_of(p.W));
  }
}

inline Matrix affine(const Matrix& X, const AffineParams& p) {
  check_affine_shapes(X, p);
  Matrix Y = X * p.W.transpose();
  Y.rowwise() += p.b.transpose();
  return Y;
}

/// Gradients of sum(dY .* affine(X, p)) with respect to X, W and b.
inline AffineGrad affine_backward(const Matrix& X, const AffineParams& p, const Matrix& dY) {
  check_affine_shapes(X, p);
  AffineGrad g;
  g.dX = dY * p.W;
  g.dW = dY.transpose() * X;
  g.db = dY.colwise().sum().transpose();
  return g;
}

inline void check_cross_shapes(const Matrix& x0, const Matrix& xl, const CrossParams& p) {
  if (x0.rows() != xl.rows() || x0.cols() != xl.cols()) {
    throw ConfigError("cross_layer: x0 shape " + shape_of(x0) + " differs from xl shape " + shape_of(xl));
  }
  if (p.W.rows() != p.W.cols() || p.b.size() != p.W.rows()) {
    throw ConfigError("cross_layer: malformed parameters, W " + shape_of(p.W) + ", b length " +
                      std::to_string(p.b.size()));
  }
  if (xl.cols() != p.W.cols()) {
    throw ConfigError("cross_layer: input shape " + shape_of(xl) + " incompatible with weight shape " + shape_of(p.W));
  }
}

/// Matrix-weight cross layer, applied row-wise:
///   x_{l+1} = x0 .* (W x_l + b) + x_l
/// Stacking k of these on x0 yields a polynomial of degree k + 1 in x0.
inline Matrix cross_layer(const Matrix& x0, const Matrix& xl, const CrossParams& p) {
  check_cross_shapes(x0, xl, p);
  Matrix u = xl * p.W.transpose();
  u.rowwise() += p.b.transpose();
  return (x0.array() * u.array()).matrix() + xl;
}

inline CrossGrad cross_backward(const Matrix& x0, const Matrix& xl, const CrossParams& p, const Matrix& dOut) {
  check_cross_shapes(x0, xl, p);
  Matrix u = xl * p.W.transpose();
  u.rowwise() += p.b.transpose();
  const Matrix du = (dOut.array() * x0.array()).matrix();
  CrossGrad g;
  g.dx0 = (dOut.array() * u.array()).matrix();
  g.dxl = dOut + du * p.W;
  g.dW = du.transpose() * xl;
  g.db = du.colwise().sum().transpose();
  return g;
}

inline double sigmoid(double z) {
  // Branching keeps exp() from overflowing for large |z|.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

template <class Derived>
Matrix activation(Activation kind, const Eigen::MatrixBase<Derived>& Z) {
  switch (kind) {
    case Activation::kSigmoid: return Z.unaryExpr([](double z) { return sigmoid(z); });
    case Activation::kRelu: return Z.cwiseMax(0.0);
    case Activation::kIdentity: return Z;
  }
  return Z;
}

/// Elementwise derivative given pre-activation Z and activation output A.
inline Matrix activation_derivative(Activation kind, const Matrix& Z, const Matrix& A) {
  switch (kind) {
    case Activation::kSigmoid: return (A.array() * (1.0 - A.array())).matrix();
    case Activation::kRelu: return (Z.array() > 0.0).cast<double>().matrix();
    case Activation::kIdentity: return Matrix::Ones(Z.rows(), Z.cols());
  }
  return Matrix::Ones(Z.rows(), Z.cols());
}

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
inline void init_glorot(AffineParams& p, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(p.W.rows() + p.W.cols()));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = u(rng);
  p.b.setZero();
}

inline void init_glorot(CrossParams& p, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(2 * p.W.rows()));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = u(rng);
  p.b.setZero();
}

struct AdamOptions {
  double learning_rate = 0.02;
  double decay = 0.995;  // multiplicative, per epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Optimizer state for a flat parameter vector. `lr` is the rate used by the
/// next step; callers set it from `scheduled_rate(epoch)` before each epoch.
struct AdamState {
  Vector m;
  Vector v;
  long long t = 0;
  double base_lr = 0.02;
  double decay = 0.995;
  double lr = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(Index n, const AdamOptions& o)
      : m(Vector::Zero(n)),
        v(Vector::Zero(n)),
        base_lr(o.learning_rate),
        decay(o.decay),
        lr(o.learning_rate),
        beta1(o.beta1),
        beta2(o.beta2),
        epsilon(o.epsilon) {}

  /// Effective rate for a zero-based epoch index: base_lr * decay^epoch.
  double scheduled_rate(long long epoch) const { return base_lr * std::pow(decay, static_cast<double>(epoch)); }
};

struct AdamResult {
  Vector params;
  AdamState state;
};

/// One bias-corrected ADAM step. Entries with zero gradient and zero moments
/// stay bit-identical, which is how frozen parameters are kept fixed.
inline AdamResult adam_update(const Vector& params, const Vector& grads, const AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
    throw ConfigError("adam_update: length mismatch (params " + std::to_string(params.size()) + ", grads " +
                      std::to_string(grads.size()) + ", moments " + std::to_string(state.m.size()) + ")");
  }
  for (Index i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adam_update: non-finite gradient at parameter index " + std::to_string(i));
    }
  }
  AdamResult out{params, state};
  AdamState& s = out.state;
  s.t += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (Index i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = s.m[i] / bc1;
    const double vhat = s.v[i] / bc2;
    out.params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.epsilon);
  }
  return out;
}

}  // namespace csn
