#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sofim/gradcheck.hpp"
#include "sofim/problems.hpp"

namespace sofim::problems {
namespace {

std::vector<std::size_t> first_n(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

std::shared_ptr<const Dataset> blobs(std::size_t n, std::size_t p, int c, double spread, std::uint64_t seed) {
  return std::make_shared<const Dataset>(make_blobs(n, p, c, spread, seed));
}

// ---------------------------------------------------------------------------
// Quadratic
// ---------------------------------------------------------------------------

TEST(Quadratic, ValueGradientAndMinimizer) {
  Matrix a(2, 2);
  a << 2, 0, 0, 4;
  Vector w_star(2);
  w_star << 1, -1;
  const QuadraticProblem q(a, w_star);
  Vector w(2);
  w << 2, 1;
  EXPECT_DOUBLE_EQ(q.value(w), 0.5 * (2 * 1 + 4 * 4));
  EXPECT_EQ(q.gradient(w), (Vector(2) << 2, 8).finished());
  EXPECT_EQ(q.value(w_star), 0.0);
  EXPECT_EQ(q.gradient(w_star), Vector::Zero(2));
  const std::vector<std::size_t> any{0};
  EXPECT_EQ(q.loss(w, any), q.value(w));
  EXPECT_EQ(*q.exact_hessian(w), a);
  EXPECT_FALSE(q.accuracy(w, any).has_value());
  EXPECT_EQ(q.train_indices().size(), 1u);
  EXPECT_EQ(q.test_indices().size(), 1u);
}

TEST(Quadratic, Errors) {
  EXPECT_THROW(QuadraticProblem(Matrix::Identity(2, 3), Vector::Zero(2)), DimensionError);
  EXPECT_THROW(QuadraticProblem(Matrix::Identity(2, 2), Vector::Zero(3)), DimensionError);
  const QuadraticProblem q(Matrix::Identity(2, 2), Vector::Zero(2));
  EXPECT_THROW(q.value(Vector::Zero(3)), DimensionError);
  EXPECT_THROW(q.loss(Vector::Zero(2), Batch{}), PreconditionError);
  EXPECT_THROW(make_quadratic(0, 10.0, 0), PreconditionError);
  EXPECT_THROW(make_quadratic(3, 0.5, 0), PreconditionError);
}

TEST(MakeQuadratic, SpectrumHitsRequestedCondition) {
  for (double cond : {1.0, 10.0, 100.0, 1e4}) {
    const auto q = make_quadratic(20, cond, 7);
    const Matrix& a = q.hessian();
    EXPECT_EQ(a, a.transpose());
    const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues();
    EXPECT_NEAR(eig.minCoeff(), 1.0, 1e-10 * cond);
    EXPECT_NEAR(eig.maxCoeff(), cond, 1e-10 * cond);
    EXPECT_LE(eig.maxCoeff() / eig.minCoeff(), cond * (1.0 + 1e-10));
  }
}

TEST(MakeQuadratic, DeterministicInSeed) {
  EXPECT_EQ(make_quadratic(6, 10.0, 1).hessian(), make_quadratic(6, 10.0, 1).hessian());
  EXPECT_NE(make_quadratic(6, 10.0, 1).hessian(), make_quadratic(6, 10.0, 2).hessian());
  EXPECT_EQ(make_quadratic(1, 50.0, 3).hessian()(0, 0), 1.0);
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

TEST(Logistic, ZeroWeightsGiveLogTwo) {
  const auto data = blobs(30, 3, 2, 2.0, 1);
  const LogisticRegressionProblem p(data);
  EXPECT_EQ(p.dim(), 4);
  const auto batch = first_n(30);
  EXPECT_NEAR(p.loss(Vector::Zero(4), batch), std::log(2.0), 1e-15);
  EXPECT_EQ(p.probability(Vector::Zero(4), 0), 0.5);
  // Every margin is zero, so every prediction is class 0: accuracy is the
  // class-0 fraction (labels alternate 0, 1).
  EXPECT_DOUBLE_EQ(*p.accuracy(Vector::Zero(4), batch), 0.5);
}

TEST(Logistic, HandComputedLossAndGradient) {
  Dataset d;
  d.features.resize(2, 1);
  d.features << 1.0, -2.0;
  d.labels = {1, 0};
  d.num_classes = 2;
  d.train = {0, 1};
  const LogisticRegressionProblem p(std::make_shared<const Dataset>(d));
  Vector w(2);
  w << 0.5, 0.25;  // weight, bias
  const double z0 = 0.75, z1 = -0.75;
  const double s0 = 1.0 / (1.0 + std::exp(-z0)), s1 = 1.0 / (1.0 + std::exp(-z1));
  const double expected = 0.5 * (-std::log(s0) - std::log(1.0 - s1));
  const std::vector<std::size_t> batch{0, 1};
  EXPECT_NEAR(p.loss(w, batch), expected, 1e-15);
  const Vector g = p.grad(w, batch);
  EXPECT_NEAR(g(0), 0.5 * ((s0 - 1.0) * 1.0 + s1 * -2.0), 1e-15);
  EXPECT_NEAR(g(1), 0.5 * ((s0 - 1.0) + s1), 1e-15);
}

TEST(Logistic, StableAtExtremeMargins) {
  Dataset d;
  d.features.resize(2, 1);
  d.features << 1.0, 1.0;
  d.labels = {0, 1};
  d.num_classes = 2;
  d.train = {0, 1};
  const LogisticRegressionProblem p(std::make_shared<const Dataset>(d));
  Vector w(2);
  w << 800.0, 0.0;
  const std::vector<std::size_t> wrong{0}, right{1};
  EXPECT_NEAR(p.loss(w, wrong), 800.0, 1e-9);
  EXPECT_EQ(p.loss(w, right), 0.0);
  EXPECT_TRUE(p.grad(w, wrong).allFinite());
}

TEST(Logistic, Errors) {
  EXPECT_THROW(LogisticRegressionProblem(blobs(30, 2, 3, 1.0, 0)), PreconditionError);
  const LogisticRegressionProblem p(blobs(10, 2, 2, 1.0, 0));
  const std::vector<std::size_t> out_of_range{10};
  EXPECT_THROW(p.loss(Vector::Zero(3), out_of_range), PreconditionError);
  EXPECT_THROW(p.loss(Vector::Zero(2), first_n(2)), DimensionError);
  EXPECT_THROW(p.loss(Vector::Zero(3), Batch{}), PreconditionError);
}

// ---------------------------------------------------------------------------
// Softmax regression
// ---------------------------------------------------------------------------

TEST(Softmax, LayoutAndUniformStart) {
  const auto data = blobs(40, 4, 3, 2.0, 2);
  const SoftmaxRegressionProblem p(data, 3);
  EXPECT_EQ(p.dim(), 15);
  EXPECT_NEAR(p.loss(Vector::Zero(15), first_n(40)), std::log(3.0), 1e-14);
  const Vector probs = p.probabilities(Vector::Zero(15), 5);
  EXPECT_NEAR(probs.sum(), 1.0, 1e-15);
  // Raising only class 2's bias makes it the prediction everywhere.
  Vector w = Vector::Zero(15);
  w(2 * 5 + 4) = 1.0;
  EXPECT_NEAR(*p.accuracy(w, first_n(39)), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, TwoClassesMatchLogisticOnDifference) {
  const auto data = blobs(50, 3, 2, 2.0, 3);
  const SoftmaxRegressionProblem soft(data, 2);
  const LogisticRegressionProblem logi(data);
  std::mt19937_64 rng(4);
  const Vector w = oracle::random_vector(8, rng);
  const Vector diff = w.segment(4, 4) - w.segment(0, 4);
  const auto batch = first_n(50);
  EXPECT_NEAR(soft.loss(w, batch), logi.loss(diff, batch), 1e-13);
}

TEST(Softmax, LogSumExpIsStable) {
  Vector z(3);
  z << 1000.0, 1000.0, -1000.0;
  EXPECT_NEAR(log_sum_exp(z), 1000.0 + std::log(2.0), 1e-12);
  z << -1000.0, -1000.0, -1000.0;
  EXPECT_NEAR(log_sum_exp(z), -1000.0 + std::log(3.0), 1e-12);
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

TEST(Mlp, FlattenRoundTripAndLayout) {
  const MlpSpec spec{3, 4, 2, Activation::kTanh};
  EXPECT_EQ(spec.param_count(), 4u * 3 + 4 + 2 * 4 + 2);
  Vector flat(static_cast<Eigen::Index>(spec.param_count()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = static_cast<double>(i);
  const MlpParams p = MlpParams::unflatten(spec, flat);
  EXPECT_EQ(p.w1(0, 1), 1.0);  // row-major
  EXPECT_EQ(p.w1(1, 0), 3.0);
  EXPECT_EQ(p.b1(0), 12.0);
  EXPECT_EQ(p.w2(1, 0), 20.0);
  EXPECT_EQ(p.b2(1), 25.0);
  EXPECT_EQ(p.flatten(), flat);
  EXPECT_THROW(MlpParams::unflatten(spec, Vector::Zero(3)), DimensionError);
}

TEST(Mlp, InitialParamsAreSeededAndBounded) {
  const auto data = blobs(20, 6, 2, 1.0, 0);
  const MlpSpec spec{6, 9, 2, Activation::kTanh};
  const MlpProblem a(data, spec, 5), b(data, spec, 5), c(data, spec, 6);
  EXPECT_EQ(a.initial_params(), b.initial_params());
  EXPECT_NE(a.initial_params(), c.initial_params());
  const MlpParams p = MlpParams::unflatten(spec, a.initial_params());
  EXPECT_LE(p.w1.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(6.0));
  EXPECT_LE(p.b1.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(6.0));
  EXPECT_LE(p.w2.cwiseAbs().maxCoeff(), 1.0 / 3.0);
  EXPECT_LE(p.b2.cwiseAbs().maxCoeff(), 1.0 / 3.0);
}

TEST(Mlp, ZeroOutputLayerGivesLogC) {
  const auto data = blobs(30, 4, 3, 2.0, 1);
  const MlpSpec spec{4, 5, 3, Activation::kRelu};
  const MlpProblem p(data, spec, 1);
  MlpParams params = MlpParams::unflatten(spec, p.initial_params());
  params.w2.setZero();
  params.b2.setZero();
  EXPECT_NEAR(p.loss(params.flatten(), first_n(30)), std::log(3.0), 1e-14);
}

TEST(Mlp, HiddenPreactivationsMatchManualForward) {
  const auto data = blobs(10, 3, 2, 1.0, 2);
  const MlpSpec spec{3, 4, 2, Activation::kTanh};
  const MlpProblem p(data, spec, 3);
  const Vector w = p.initial_params();
  const MlpParams params = MlpParams::unflatten(spec, w);
  const std::vector<std::size_t> batch{2, 7};
  const RowMatrix z = p.hidden_preactivations(w, batch);
  for (int r = 0; r < 2; ++r) {
    const Vector x = data->features.row(static_cast<Eigen::Index>(batch[r])).transpose();
    const Vector expected = params.w1 * x + params.b1;
    EXPECT_LE((z.row(r).transpose() - expected).norm(), 1e-14);
  }
}

TEST(Mlp, Errors) {
  const auto data = blobs(10, 3, 2, 1.0, 2);
  EXPECT_THROW(MlpProblem(data, MlpSpec{4, 4, 2, Activation::kTanh}, 0), DimensionError);
  EXPECT_THROW(MlpProblem(data, MlpSpec{3, 0, 2, Activation::kTanh}, 0), DimensionError);
}

// ---------------------------------------------------------------------------
// Gradients against the independent finite-difference oracle
// ---------------------------------------------------------------------------

struct GradCase {
  std::string label;
  std::function<std::unique_ptr<Problem>()> make;
  double tolerance;
  double scale;
};

class GradientOracle : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradientOracle, AnalyticMatchesCentralDifferences) {
  const auto& c = GetParam();
  const auto problem = c.make();
  std::mt19937_64 rng(123);
  auto pool = problem->train_indices();
  for (int k = 0; k < 10; ++k) {
    const Vector w = oracle::random_vector(problem->dim(), rng, c.scale);
    std::vector<std::size_t> batch(pool.begin(), pool.end());
    std::shuffle(batch.begin(), batch.end(), rng);
    batch.resize(std::min<std::size_t>(8, batch.size()));
    const Vector analytic = problem->grad(w, batch);
    const Vector numeric = oracle::central_difference(*problem, w, batch);
    ASSERT_LE(oracle::rel_error(analytic, numeric), c.tolerance) << c.label << " point " << k;
  }
}

TEST_P(GradientOracle, PerSampleGradientsAverageToBatchGradient) {
  const auto& c = GetParam();
  const auto problem = c.make();
  std::mt19937_64 rng(9);
  const Vector w = oracle::random_vector(problem->dim(), rng, c.scale);
  auto pool = problem->train_indices();
  const std::vector<std::size_t> batch(pool.begin(), pool.begin() + std::min<std::ptrdiff_t>(6, pool.size()));
  const auto per = problem->per_sample_grads(w, batch);
  ASSERT_EQ(per.size(), batch.size());
  Vector mean = Vector::Zero(problem->dim());
  for (const auto& g : per) mean += g;
  mean /= static_cast<double>(per.size());
  EXPECT_LE(oracle::rel_error(mean, problem->grad(w, batch)), 1e-13);
  // Single-sample batches agree with the per-sample rows.
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::vector<std::size_t> one{batch[i]};
    EXPECT_LE(oracle::rel_error(per[i], problem->grad(w, one)), 1e-13);
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllProblems, GradientOracle,
    ::testing::Values(
        GradCase{"quadratic", [] { return std::make_unique<QuadraticProblem>(make_quadratic(10, 10.0, 1)); }, 1e-8,
                 1.0},
        GradCase{"logistic",
                 [] { return std::make_unique<LogisticRegressionProblem>(blobs(60, 5, 2, 2.0, 2)); }, 1e-6, 1.0},
        GradCase{"softmax",
                 [] { return std::make_unique<SoftmaxRegressionProblem>(blobs(60, 5, 3, 2.0, 3), 3); }, 1e-6,
                 1.0},
        GradCase{"mlp_tanh",
                 [] {
                   return std::make_unique<MlpProblem>(blobs(60, 5, 3, 2.0, 4),
                                                       MlpSpec{5, 8, 3, Activation::kTanh}, 4);
                 },
                 1e-5, 0.5}),
    [](const auto& info) { return info.param.label; });

TEST(GradientOracle, ReluAwayFromKinks) {
  const MlpProblem p(blobs(60, 5, 3, 2.0, 5), MlpSpec{5, 8, 3, Activation::kRelu}, 5);
  std::mt19937_64 rng(77);
  int checked = 0;
  for (int attempt = 0; attempt < 500 && checked < 10; ++attempt) {
    const Vector w = oracle::random_vector(p.dim(), rng, 0.5);
    const std::vector<std::size_t> batch{0, 3, 8, 11, 20, 31, 40, 47};
    if (p.hidden_preactivations(w, batch).cwiseAbs().minCoeff() <= 1e-3) continue;
    ASSERT_LE(oracle::rel_error(p.grad(w, batch), oracle::central_difference(p, w, batch)), 1e-4);
    ++checked;
  }
  EXPECT_EQ(checked, 10);
}

TEST(GradCheckSuite, AllProblemsPass) {
  const auto results = run_gradient_checks(7, 20);
  ASSERT_EQ(results.size(), 5u);
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed()) << r.problem << " " << r.max_relative_error << " > " << r.tolerance;
    EXPECT_EQ(r.points, 20);
  }
}

TEST(GradCheckSuite, RelativeErrorDefinition) {
  Vector a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  EXPECT_DOUBLE_EQ(relative_error(a, b), std::sqrt(2.0));
  EXPECT_EQ(relative_error(Vector::Zero(2), Vector::Zero(2)), 0.0);
}

}  // namespace
}  // namespace sofim::problems
