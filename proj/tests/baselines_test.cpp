#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sofim/baselines.hpp"
#include "sofim/core.hpp"

namespace sofim::baselines {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// ---------------------------------------------------------------------------
// SGD with momentum
// ---------------------------------------------------------------------------

TEST(LearningRate, ConstantSchedule) {
  SgdConfig cfg;
  cfg.eta = 0.3;
  EXPECT_EQ(learning_rate(cfg, 0), 0.3);
  EXPECT_EQ(learning_rate(cfg, 12345), 0.3);
}

TEST(LearningRate, CosineEndpointsAndMidpoint) {
  SgdConfig cfg;
  cfg.eta = 0.2;
  cfg.schedule = LearningRateSchedule::cosine(100);
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 0), 0.2);
  EXPECT_NEAR(learning_rate(cfg, 50), 0.1, 1e-15);
  EXPECT_EQ(learning_rate(cfg, 100), 0.0);
  EXPECT_EQ(learning_rate(cfg, 150), 0.0);
  for (int s = 0; s <= 100; ++s) {
    const double expected = 0.5 * 0.2 * (1.0 + std::cos(std::numbers::pi * s / 100.0));
    EXPECT_NEAR(learning_rate(cfg, s), expected, 1e-15);
    if (s > 0) EXPECT_LE(learning_rate(cfg, s), learning_rate(cfg, s - 1));
  }
}

TEST(SgdMomentum, FirstStepIsPlainSgd) {
  SgdConfig cfg;
  cfg.eta = 0.1;
  const auto r = sgd_momentum_step(vec({1, 2}), Vector::Zero(2), vec({1, -1}), cfg, 0);
  EXPECT_NEAR(r.params(0), 0.9, 1e-15);
  EXPECT_NEAR(r.params(1), 2.1, 1e-15);
  EXPECT_EQ(r.velocity, vec({1, -1}));
}

TEST(SgdMomentum, VelocityAccumulates) {
  SgdConfig cfg;
  cfg.eta = 1.0;
  cfg.momentum = 0.5;
  const auto r = sgd_momentum_step(vec({0}), vec({2}), vec({1}), cfg, 3);
  EXPECT_DOUBLE_EQ(r.velocity(0), 2.0);
  EXPECT_DOUBLE_EQ(r.params(0), -2.0);
}

TEST(SgdMomentum, WeightDecayIsCoupled) {
  SgdConfig cfg;
  cfg.eta = 0.5;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.1;
  const auto r = sgd_momentum_step(vec({2}), Vector::Zero(1), vec({0}), cfg, 0);
  EXPECT_DOUBLE_EQ(r.velocity(0), 0.2);
  EXPECT_DOUBLE_EQ(r.params(0), 1.9);
}

TEST(SgdMomentum, InPlaceMatchesFunctional) {
  std::mt19937_64 rng(3);
  SgdConfig cfg;
  cfg.eta = 0.05;
  cfg.weight_decay = 1e-4;
  cfg.schedule = LearningRateSchedule::cosine(50);
  Vector w_fn = oracle::random_vector(25, rng);
  Vector v = Vector::Zero(25);
  Vector w_ip = w_fn;
  SgdMomentumOptimizer opt(25, cfg);
  for (int s = 0; s < 60; ++s) {
    const Vector g = oracle::random_vector(25, rng);
    auto r = sgd_momentum_step(w_fn, v, g, cfg, s);
    w_fn = r.params;
    v = r.velocity;
    opt.step(w_ip, g);
  }
  EXPECT_EQ(opt.steps_taken(), 60);
  EXPECT_LE(oracle::rel_error(w_ip, w_fn), 1e-14);
  EXPECT_LE(oracle::rel_error(opt.velocity(), v), 1e-14);
}

TEST(SgdMomentum, ConfigErrors) {
  SgdConfig cfg;
  cfg.eta = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.weight_decay = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.schedule = LearningRateSchedule::cosine(0);
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(sgd_momentum_step(vec({1}), vec({1, 2}), vec({1}), SgdConfig{}, 0), DimensionError);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

TEST(Adam, FirstStepMovesByEtaTimesSign) {
  // With bias correction the first step is eta * g / (|g| + eps).
  AdamConfig cfg;
  cfg.eta = 0.01;
  const auto r = adam_step(vec({1, 1, 1}), Vector::Zero(3), Vector::Zero(3), vec({3, -0.5, 0}), cfg, 1);
  EXPECT_NEAR(r.params(0), 0.99, 1e-9);
  EXPECT_NEAR(r.params(1), 1.01, 1e-9);
  EXPECT_EQ(r.params(2), 1.0);
}

TEST(Adam, InPlaceMatchesFunctional) {
  std::mt19937_64 rng(8);
  AdamConfig cfg;
  cfg.eta = 0.01;
  Vector w_fn = oracle::random_vector(12, rng);
  Vector m = Vector::Zero(12), v = Vector::Zero(12);
  Vector w_ip = w_fn;
  AdamOptimizer opt(12, cfg);
  for (int t = 1; t <= 100; ++t) {
    const Vector g = oracle::random_vector(12, rng);
    auto r = adam_step(w_fn, m, v, g, cfg, t);
    w_fn = r.params;
    m = r.m;
    v = r.v;
    opt.step(w_ip, g);
  }
  EXPECT_LE(oracle::rel_error(w_ip, w_fn), 1e-13);
}

TEST(Adam, Errors) {
  AdamConfig cfg;
  EXPECT_THROW(adam_step(vec({1}), vec({0}), vec({0}), vec({1}), cfg, 0), PreconditionError);
  cfg.beta2 = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.epsilon = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// Empirical FIM and NGD
// ---------------------------------------------------------------------------

TEST(EmpiricalFim, MatchesOuterProductAverage) {
  std::mt19937_64 rng(21);
  std::vector<GradientVector> grads;
  for (int i = 0; i < 7; ++i) grads.push_back(oracle::random_vector(6, rng));
  const Matrix f = empirical_fim(grads).matrix;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      double expected = 0.0;
      for (const auto& g : grads) expected += g(i) * g(j);
      expected /= 7.0;
      EXPECT_NEAR(f(i, j), expected, 1e-14);
    }
  }
  EXPECT_EQ(f, f.transpose());
}

TEST(EmpiricalFim, SingleGradientIsRankOne) {
  const Matrix f = empirical_fim(std::vector<GradientVector>{vec({1, 2})}).matrix;
  EXPECT_EQ(f(0, 0), 1.0);
  EXPECT_EQ(f(0, 1), 2.0);
  EXPECT_EQ(f(1, 0), 2.0);
  EXPECT_EQ(f(1, 1), 4.0);
}

TEST(EmpiricalFim, DenseCapAndErrors) {
  std::vector<GradientVector> big{Vector::Ones(201)};
  EXPECT_THROW(empirical_fim(big), PreconditionError);
  EXPECT_NO_THROW(empirical_fim(std::vector<GradientVector>{Vector::Ones(200)}));
  EXPECT_THROW(empirical_fim(std::vector<GradientVector>{}), PreconditionError);
  EXPECT_THROW(empirical_fim(std::vector<GradientVector>{vec({1, 2}), vec({1})}), DimensionError);
}

TEST(NgdStep, MatchesDenseOracle) {
  std::mt19937_64 rng(31);
  std::vector<GradientVector> grads;
  for (int i = 0; i < 5; ++i) grads.push_back(oracle::random_vector(8, rng));
  const Vector w = oracle::random_vector(8, rng);

  oracle::DenseMatrix f(8, std::vector<double>(8, 0.0));
  std::vector<double> mean(8, 0.0);
  for (const auto& g : grads) {
    for (int i = 0; i < 8; ++i) {
      mean[i] += g(i) / 5.0;
      for (int j = 0; j < 8; ++j) f[i][j] += g(i) * g(j) / 5.0;
    }
  }
  for (int i = 0; i < 8; ++i) f[i][i] += 0.01;
  const Vector expected = w - 0.5 * oracle::from_std(oracle::gaussian_solve(f, mean));
  EXPECT_LE(oracle::rel_error(ngd_step(w, grads, 0.5, 0.01), expected), 1e-10);
}

// With one gradient and damping rho, damped NGD and a beta = 0 SOFIM step are
// the same update.
TEST(NgdStep, SingleSampleEqualsSofimWithoutMomentum) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector w = oracle::random_vector(10, rng);
    const Vector g = oracle::random_vector(10, rng);
    const auto sofim = sofim_step(w, SofimState(10, {0.1, 0.5, 0.0}), g);
    const Vector ngd = ngd_step(w, std::vector<GradientVector>{g}, 0.1, 0.5);
    EXPECT_LE(oracle::rel_error(sofim.params, ngd), 1e-12);
  }
}

TEST(NgdStep, Errors) {
  const std::vector<GradientVector> g{vec({1, 0})};
  EXPECT_THROW(ngd_step(vec({0, 0}), g, 0.1, 0.0), PreconditionError);
  EXPECT_THROW(ngd_step(vec({0, 0}), g, 0.0, 0.1), PreconditionError);
  EXPECT_THROW(ngd_step(vec({0, 0, 0}), g, 0.1, 0.1), DimensionError);
}

// ---------------------------------------------------------------------------
// Newton on quadratics
// ---------------------------------------------------------------------------

TEST(NewtonQuadratic, UnitStepLandsOnMinimizer) {
  const auto q = problems::make_quadratic(12, 100.0, 5);
  const Vector w = Vector::Constant(12, 3.0);
  EXPECT_LE((newton_step_quadratic(w, q, 1.0) - q.minimizer()).norm(), 1e-10);
}

TEST(NewtonQuadratic, PartialStepContractsDistance) {
  const auto q = problems::make_quadratic(5, 10.0, 6);
  const Vector w = Vector::Constant(5, -2.0);
  const Vector next = newton_step_quadratic(w, q, 0.25);
  EXPECT_LE(oracle::rel_error(next - q.minimizer(), 0.75 * (w - q.minimizer())), 1e-12);
}

TEST(NewtonQuadratic, RejectsIndefiniteHessian) {
  Matrix a(2, 2);
  a << 1, 0, 0, -1;
  const problems::QuadraticProblem q(a, vec({0, 0}));
  EXPECT_THROW(newton_step_quadratic(vec({1, 1}), q, 1.0), PreconditionError);
}

}  // namespace
}  // namespace sofim::baselines
