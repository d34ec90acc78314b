#include <cmath>
#include <random>

#include "sofim/problems.hpp"

namespace sofim::problems {
namespace {

void require_batch(Batch batch) {
  if (batch.empty()) throw PreconditionError("empty batch");
}

}  // namespace

QuadraticProblem::QuadraticProblem(Matrix a, ParamVector w_star) : a_(std::move(a)), w_star_(std::move(w_star)) {
  if (a_.rows() != a_.cols() || a_.rows() != w_star_.size() || w_star_.size() < 1) {
    throw DimensionError("QuadraticProblem: A must be d x d with d = len(w_star) >= 1");
  }
}

double QuadraticProblem::value(const Vector& w) const {
  require_same_size(dim(), w.size(), "QuadraticProblem: parameters");
  const Vector r = w - w_star_;
  return 0.5 * r.dot(a_ * r);
}

GradientVector QuadraticProblem::gradient(const Vector& w) const {
  require_same_size(dim(), w.size(), "QuadraticProblem: parameters");
  return a_ * (w - w_star_);
}

double QuadraticProblem::loss(const Vector& w, Batch batch) const {
  require_batch(batch);
  return value(w);
}

GradientVector QuadraticProblem::grad(const Vector& w, Batch batch) const {
  require_batch(batch);
  return gradient(w);
}

std::vector<GradientVector> QuadraticProblem::per_sample_grads(const Vector& w, Batch batch) const {
  require_batch(batch);
  return std::vector<GradientVector>(batch.size(), gradient(w));
}

std::optional<Matrix> QuadraticProblem::exact_hessian(const Vector&) const { return a_; }

QuadraticProblem make_quadratic(Eigen::Index d, double condition_number, std::uint64_t seed) {
  if (d < 1) throw PreconditionError("make_quadratic: d must be >= 1");
  if (!(condition_number >= 1.0) || !std::isfinite(condition_number)) {
    throw PreconditionError("make_quadratic: condition number must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double log_cond = std::log(condition_number);
  Vector eig(d);
  for (Eigen::Index i = 0; i < d; ++i) eig(i) = std::exp(log_cond * unit(rng));
  eig(0) = 1.0;
  if (d >= 2) eig(d - 1) = condition_number;

  Matrix gaussian(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) gaussian(i, j) = normal(rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian).householderQ();

  Matrix a = q * eig.asDiagonal() * q.transpose();
  a = 0.5 * (a + a.transpose()).eval();

  ParamVector w_star(d);
  for (auto& x : w_star) x = normal(rng);
  return QuadraticProblem(std::move(a), std::move(w_star));
}

}  // namespace sofim::problems
