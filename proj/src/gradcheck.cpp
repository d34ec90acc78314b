#include "sofim/gradcheck.hpp"

#include <algorithm>
#include <memory>
#include <numeric>
#include <random>

namespace sofim::problems {
namespace {

Vector random_vector(Eigen::Index d, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(d);
  for (auto& x : v) x = normal(rng);
  return v;
}

std::vector<std::size_t> random_batch(std::span<const std::size_t> pool, std::size_t size,
                                      std::mt19937_64& rng) {
  std::vector<std::size_t> batch(pool.begin(), pool.end());
  std::shuffle(batch.begin(), batch.end(), rng);
  batch.resize(std::min(size, batch.size()));
  return batch;
}

GradCheckResult check(const Problem& problem, double tolerance, int points, double scale,
                      std::mt19937_64& rng, bool avoid_relu_kinks = false) {
  GradCheckResult result{problem.name(), 0.0, tolerance, points};
  const auto* mlp = dynamic_cast<const MlpProblem*>(&problem);
  for (int k = 0; k < points; ++k) {
    Vector w;
    std::vector<std::size_t> batch;
    for (int attempt = 0;; ++attempt) {
      w = random_vector(problem.dim(), scale, rng);
      batch = random_batch(problem.train_indices(), 8, rng);
      if (!avoid_relu_kinks || mlp == nullptr) break;
      const RowMatrix z = mlp->hidden_preactivations(w, batch);
      if (z.cwiseAbs().minCoeff() > 1e-3 || attempt > 1000) break;
    }
    const Vector analytic = problem.grad(w, batch);
    const Vector numeric = finite_difference_gradient(problem, w, batch);
    result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic, numeric));
  }
  return result;
}

}  // namespace

GradientVector finite_difference_gradient(const Problem& problem, const Vector& w, Batch batch,
                                          double step) {
  GradientVector g(w.size());
  Vector probe = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double orig = probe(i);
    probe(i) = orig + step;
    const double up = problem.loss(probe, batch);
    probe(i) = orig - step;
    const double down = problem.loss(probe, batch);
    probe(i) = orig;
    g(i) = (up - down) / (2.0 * step);
  }
  return g;
}

double relative_error(const Vector& a, const Vector& b) {
  require_same_size(a.size(), b.size(), "relative_error");
  const double denom = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / denom;
}

std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed, int points) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckResult> results;

  const QuadraticProblem quadratic = make_quadratic(10, 10.0, seed);
  results.push_back(check(quadratic, 1e-8, points, 1.0, rng));

  auto binary = std::make_shared<const Dataset>(make_blobs(60, 5, 2, 2.0, seed + 1));
  results.push_back(check(LogisticRegressionProblem(binary), 1e-6, points, 1.0, rng));

  auto multi = std::make_shared<const Dataset>(make_blobs(60, 5, 3, 2.0, seed + 2));
  results.push_back(check(SoftmaxRegressionProblem(multi, 3), 1e-6, points, 1.0, rng));

  MlpProblem tanh_net(multi, MlpSpec{5, 8, 3, Activation::kTanh}, seed + 3);
  GradCheckResult tanh_result = check(tanh_net, 1e-5, points, 0.5, rng);
  tanh_result.problem = "mlp-tanh";
  results.push_back(tanh_result);

  MlpProblem relu_net(multi, MlpSpec{5, 8, 3, Activation::kRelu}, seed + 4);
  GradCheckResult relu_result = check(relu_net, 1e-4, points, 0.5, rng, true);
  relu_result.problem = "mlp-relu";
  results.push_back(relu_result);
  return results;
}

}  // namespace sofim::problems
