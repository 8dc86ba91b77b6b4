// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "csn/nncore.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"

namespace csn {
namespace {

using testing::max_relative_error;
using testing::numeric_gradient;
using testing::random_matrix;

TEST(AffineTest, IdentityWeightsReturnInput) {
  AffineParams p(2, 2);
  p.W.setIdentity();
  Matrix X(1, 2);
  X << 1, 2;
  const Matrix Y = affine(X, p);
  EXPECT_EQ(Y(0, 0), 1.0);
  EXPECT_EQ(Y(0, 1), 2.0);
}

TEST(AffineTest, HandArithmetic) {
  AffineParams p(1, 2);
  p.W << 2, 3;
  p.b << 1;
  Matrix X(1, 2);
  X << 1, 1;
  EXPECT_EQ(affine(X, p)(0, 0), 6.0);
}

TEST(AffineTest, MatchesNaiveTripleLoop) {
  std::mt19937_64 rng(11);
  const Matrix X = random_matrix(3, 4, rng);
  AffineParams p(5, 4);
  p.W = random_matrix(5, 4, rng);
  p.b = random_matrix(5, 1, rng).col(0);
  const Matrix Y = affine(X, p);
  for (Index i = 0; i < 3; ++i) {
    for (Index o = 0; o < 5; ++o) {
      double acc = p.b[o];
      for (Index k = 0; k < 4; ++k) acc += p.W(o, k) * X(i, k);
      EXPECT_NEAR(Y(i, o), acc, 1e-12);
    }
  }
}

TEST(AffineTest, ShapeMismatchNamesBothShapes) {
  AffineParams p(5, 4);
  const Matrix X = Matrix::Zero(3, 3);
  try {
    affine(X, p);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3x3"), std::string::npos);
    EXPECT_NE(msg.find("5x4"), std::string::npos);
  }
}

TEST(AffineTest, LinearWithoutBias) {
  std::mt19937_64 rng(3);
  AffineParams p(3, 4);
  p.W = random_matrix(3, 4, rng);
  const Matrix X = random_matrix(6, 4, rng);
  const Matrix Y = random_matrix(6, 4, rng);
  const double a = 1.7, b = -0.4;
  const Matrix lhs = affine(a * X + b * Y, p);
  const Matrix rhs = a * affine(X, p) + b * affine(Y, p);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CrossLayerTest, ZeroWeightsPassThrough) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 1 + trial % 6;
    const Matrix x0 = random_matrix(4, d, rng, 3.0);
    const Matrix xl = random_matrix(4, d, rng, 3.0);
    const Matrix out = cross_layer(x0, xl, CrossParams(d));
    EXPECT_EQ(out, xl);
  }
}

TEST(CrossLayerTest, ScalarExpansion) {
  CrossParams p(1);
  p.W << 1;
  Matrix x0(1, 1), xl(1, 1);
  x0 << 2;
  xl << 3;
  EXPECT_EQ(cross_layer(x0, xl, p)(0, 0), 9.0);
}

TEST(CrossLayerTest, TwoDimensionalHandExpansion) {
  CrossParams p(2);
  p.W.setIdentity();
  p.b << 1, 1;
  Matrix x0(1, 2), xl(1, 2);
  x0 << 1, 2;
  xl << 1, 1;
  const Matrix out = cross_layer(x0, xl, p);
  EXPECT_EQ(out(0, 0), 3.0);
  EXPECT_EQ(out(0, 1), 5.0);
}

TEST(CrossLayerTest, DimensionMismatchThrows) {
  EXPECT_THROW(cross_layer(Matrix::Zero(2, 3), Matrix::Zero(2, 2), CrossParams(2)), ConfigError);
  EXPECT_THROW(cross_layer(Matrix::Zero(2, 3), Matrix::Zero(2, 3), CrossParams(2)), ConfigError);
}

TEST(ActivationTest, KnownValues) {
  Matrix z(1, 3);
  z << 0.0, -3.0, 3.0;
  EXPECT_EQ(activation(Activation::kSigmoid, z)(0, 0), 0.5);
  EXPECT_EQ(activation(Activation::kRelu, z)(0, 1), 0.0);
  EXPECT_EQ(activation(Activation::kRelu, z)(0, 2), 3.0);
  EXPECT_EQ(activation(Activation::kIdentity, z), z);
  EXPECT_NEAR(sigmoid(5.0), 0.993307, 1e-6);
  EXPECT_NEAR(sigmoid(5.0), 1.0 / (1.0 + std::exp(-5.0)), 1e-15);
}

TEST(ActivationTest, RangeProperties) {
  std::mt19937_64 rng(17);
  const Matrix z = random_matrix(20, 20, rng, 30.0);
  const Matrix s = activation(Activation::kSigmoid, z);
  EXPECT_GT(s.minCoeff(), 0.0);
  EXPECT_LT(s.maxCoeff(), 1.0);
  EXPECT_GE(activation(Activation::kRelu, z).minCoeff(), 0.0);
}

// Random shapes up to 8x8; the scalar probe is sum(R .* layer(...)).
TEST(LayerGradientTest, AffineMatchesFiniteDifferences) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 15; ++trial) {
    std::uniform_int_distribution<Index> dim(1, 8);
    const Index n = dim(rng), in = dim(rng), out = dim(rng);
    Matrix X = random_matrix(n, in, rng);
    AffineParams p(out, in);
    p.W = random_matrix(out, in, rng);
    p.b = random_matrix(out, 1, rng).col(0);
    const Matrix R = random_matrix(n, out, rng);
    auto f = [&] { return (R.array() * affine(X, p).array()).sum(); };
    const AffineGrad g = affine_backward(X, p, R);
    EXPECT_LT(max_relative_error(g.dX, numeric_gradient(X, f)), 1e-4);
    EXPECT_LT(max_relative_error(g.dW, numeric_gradient(p.W, f)), 1e-4);
    EXPECT_LT(max_relative_error(g.db, numeric_gradient(p.b, f)), 1e-4);
  }
}

TEST(LayerGradientTest, CrossMatchesFiniteDifferences) {
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 15; ++trial) {
    std::uniform_int_distribution<Index> dim(1, 8);
    const Index n = dim(rng), d = dim(rng);
    Matrix x0 = random_matrix(n, d, rng);
    Matrix xl = random_matrix(n, d, rng);
    CrossParams p(d);
    p.W = random_matrix(d, d, rng);
    p.b = random_matrix(d, 1, rng).col(0);
    const Matrix R = random_matrix(n, d, rng);
    auto f = [&] { return (R.array() * cross_layer(x0, xl, p).array()).sum(); };
    const CrossGrad g = cross_backward(x0, xl, p, R);
    EXPECT_LT(max_relative_error(g.dx0, numeric_gradient(x0, f)), 1e-4);
    EXPECT_LT(max_relative_error(g.dxl, numeric_gradient(xl, f)), 1e-4);
    EXPECT_LT(max_relative_error(g.dW, numeric_gradient(p.W, f)), 1e-4);
    EXPECT_LT(max_relative_error(g.db, numeric_gradient(p.b, f)), 1e-4);
  }
}

TEST(LayerGradientTest, ActivationDerivatives) {
  std::mt19937_64 rng(303);
  for (Activation kind : {Activation::kSigmoid, Activation::kRelu, Activation::kIdentity}) {
    Matrix Z = random_matrix(8, 8, rng, 4.0);
    const Matrix R = random_matrix(8, 8, rng);
    auto f = [&] { return (R.array() * activation(kind, Z).array()).sum(); };
    const Matrix A = activation(kind, Z);
    const Matrix analytic = (R.array() * activation_derivative(kind, Z, A).array()).matrix();
    EXPECT_LT(max_relative_error(analytic, numeric_gradient(Z, f)), 1e-4) << to_string(kind);
  }
}

TEST(AdamTest, ZeroGradientIsFixedPoint) {
  AdamState s(3, AdamOptions{});
  s.m << 0.0, 0.0, 0.0;
  const Vector params = Vector::LinSpaced(3, -1.0, 1.0);
  const AdamResult r = adam_update(params, Vector::Zero(3), s);
  EXPECT_EQ(r.params, params);
  EXPECT_EQ(r.state.m, s.m);
  EXPECT_EQ(r.state.v, s.v);
  EXPECT_EQ(r.state.t, s.t + 1);
}

TEST(AdamTest, FirstStepMovesBySignTimesRate) {
  AdamOptions o;
  o.learning_rate = 0.1;
  const AdamState s(3, o);
  Vector g(3);
  g << 2.5, -0.01, 40.0;
  const Vector theta = Vector::Zero(3);
  const AdamResult r = adam_update(theta, g, s);
  for (Index i = 0; i < 3; ++i) {
    const double sign = g[i] > 0 ? 1.0 : -1.0;
    EXPECT_NEAR(r.params[i], -0.1 * sign, 1e-6);
  }
}

TEST(AdamTest, ConvergesOnOneDimensionalQuadratic) {
  AdamOptions o;
  o.learning_rate = 0.05;
  o.decay = 1.0;
  AdamState s(1, o);
  Vector theta = Vector::Zero(1);
  for (int step = 0; step < 500; ++step) {
    Vector g(1);
    g << 2.0 * (theta[0] - 3.0);
    AdamResult r = adam_update(theta, g, s);
    theta = r.params;
    s = r.state;
  }
  EXPECT_NEAR(theta[0], 3.0, 0.01);
}

TEST(AdamTest, Deterministic) {
  std::mt19937_64 rng(9);
  AdamState s(6, AdamOptions{});
  const Vector p = random_matrix(6, 1, rng).col(0);
  const Vector g = random_matrix(6, 1, rng).col(0);
  const AdamResult a = adam_update(p, g, s);
  const AdamResult b = adam_update(p, g, s);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.state.m, b.state.m);
  EXPECT_EQ(a.state.v, b.state.v);
}

TEST(AdamTest, NonFiniteGradientNamesIndex) {
  AdamState s(4, AdamOptions{});
  Vector g = Vector::Zero(4);
  g[2] = std::nan("");
  try {
    adam_update(Vector::Zero(4), g, s);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
  }
}

TEST(AdamTest, ScheduledRateIsExactPowerOfDecay) {
  AdamOptions o;
  o.learning_rate = 0.02;
  o.decay = 0.995;
  const AdamState s(1, o);
  for (int e : {0, 1, 7, 100, 999}) EXPECT_EQ(s.scheduled_rate(e), 0.02 * std::pow(0.995, e));
  EXPECT_EQ(s.scheduled_rate(0), 0.02);
}

TEST(InitTest, GlorotBoundsAndZeroBias) {
  Rng rng(1);
  AffineParams p(20, 150);
  init_glorot(p, rng);
  const double limit = std::sqrt(6.0 / 170.0);
  EXPECT_LE(p.W.cwiseAbs().maxCoeff(), limit);
  EXPECT_GT(p.W.cwiseAbs().maxCoeff(), 0.5 * limit);
  EXPECT_TRUE(p.b.isZero());
}

}  // namespace
}  // namespace csn
