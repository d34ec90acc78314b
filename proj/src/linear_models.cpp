#include <algorithm>
#include <cmath>

#include "sofim/problems.hpp"

namespace sofim::problems {
namespace {

void require_batch(Batch batch, std::size_t n) {
  if (batch.empty()) throw PreconditionError("empty batch");
  for (std::size_t i : batch) {
    if (i >= n) throw PreconditionError("batch index out of range");
  }
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::shared_ptr<const Dataset> checked(std::shared_ptr<const Dataset> data) {
  if (!data) throw PreconditionError("null dataset");
  data->validate();
  return data;
}

}  // namespace

double log_sum_exp(const Eigen::Ref<const Vector>& z) {
  const double m = z.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((z.array() - m).exp().sum());
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

LogisticRegressionProblem::LogisticRegressionProblem(std::shared_ptr<const Dataset> data)
    : data_(checked(std::move(data))) {
  for (int y : data_->labels) {
    if (y != 0 && y != 1) throw PreconditionError("logistic regression needs labels in {0, 1}");
  }
}

double LogisticRegressionProblem::margin(const Vector& w, std::size_t i) const {
  const auto p = static_cast<Eigen::Index>(data_->width());
  return data_->features.row(static_cast<Eigen::Index>(i)).dot(w.head(p)) + w(p);
}

double LogisticRegressionProblem::probability(const Vector& w, std::size_t i) const {
  require_same_size(dim(), w.size(), "logistic: parameters");
  return sigmoid(margin(w, i));
}

double LogisticRegressionProblem::loss(const Vector& w, Batch batch) const {
  require_same_size(dim(), w.size(), "logistic: parameters");
  require_batch(batch, data_->size());
  double total = 0.0;
  for (std::size_t i : batch) {
    const double z = margin(w, i);
    // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
    total += softplus(z) - (data_->labels[i] == 1 ? z : 0.0);
  }
  return total / static_cast<double>(batch.size());
}

GradientVector LogisticRegressionProblem::grad(const Vector& w, Batch batch) const {
  require_same_size(dim(), w.size(), "logistic: parameters");
  require_batch(batch, data_->size());
  const auto p = static_cast<Eigen::Index>(data_->width());
  GradientVector g = GradientVector::Zero(dim());
  for (std::size_t i : batch) {
    const double r = sigmoid(margin(w, i)) - data_->labels[i];
    g.head(p) += r * data_->features.row(static_cast<Eigen::Index>(i)).transpose();
    g(p) += r;
  }
  return g / static_cast<double>(batch.size());
}

std::vector<GradientVector> LogisticRegressionProblem::per_sample_grads(const Vector& w, Batch batch) const {
  require_same_size(dim(), w.size(), "logistic: parameters");
  require_batch(batch, data_->size());
  const auto p = static_cast<Eigen::Index>(data_->width());
  std::vector<GradientVector> out;
  out.reserve(batch.size());
  for (std::size_t i : batch) {
    const double r = sigmoid(margin(w, i)) - data_->labels[i];
    GradientVector g(dim());
    g.head(p) = r * data_->features.row(static_cast<Eigen::Index>(i)).transpose();
    g(p) = r;
    out.push_back(std::move(g));
  }
  return out;
}

std::optional<double> LogisticRegressionProblem::accuracy(const Vector& w, Batch batch) const {
  require_same_size(dim(), w.size(), "logistic: parameters");
  require_batch(batch, data_->size());
  std::size_t correct = 0;
  for (std::size_t i : batch) {
    // Class 1 only when strictly more likely; a tie goes to class 0.
    const int predicted = margin(w, i) > 0.0 ? 1 : 0;
    if (predicted == data_->labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

LogisticRegressionProblem logistic_regression_problem(std::shared_ptr<const Dataset> data) {
  return LogisticRegressionProblem(std::move(data));
}

// ---------------------------------------------------------------------------
// Softmax regression
// ---------------------------------------------------------------------------

SoftmaxRegressionProblem::SoftmaxRegressionProblem(std::shared_ptr<const Dataset> data, int num_classes)
    : data_(checked(std::move(data))), classes_(num_classes) {
  if (classes_ < 2) throw PreconditionError("softmax regression needs at least 2 classes");
  for (int y : data_->labels) {
    if (y < 0 || y >= classes_) throw PreconditionError("softmax regression: label out of range");
  }
}

Vector SoftmaxRegressionProblem::logits(const Vector& w, std::size_t i) const {
  const auto p1 = static_cast<Eigen::Index>(data_->width()) + 1;
  const auto p = p1 - 1;
  Eigen::Map<const RowMatrix> weights(w.data(), classes_, p1);
  return weights.leftCols(p) * data_->features.row(static_cast<Eigen::Index>(i)).transpose() +
         weights.col(p);
}

Vector SoftmaxRegressionProblem::probabilities(const Vector& w, std::size_t i) const {
  require_same_size(dim(), w.size(), "softmax: parameters");
  if (i >= data_->size()) throw PreconditionError("sample index out of range");
  const Vector z = logits(w, i);
  return (z.array() - log_sum_exp(z)).exp();
}

double SoftmaxRegressionProblem::loss(const Vector& w, Batch batch) const {
  require_same_size(dim(), w.size(), "softmax: parameters");
  require_batch(batch, data_->size());
  double total = 0.0;
  for (std::size_t i : batch) {
    const Vector z = logits(w, i);
    total += log_sum_exp(z) - z(data_->labels[i]);
  }
  return total / static_cast<double>(batch.size());
}

GradientVector SoftmaxRegressionProblem::grad(const Vector& w, Batch batch) const {
  require_same_size(dim(), w.size(), "softmax: parameters");
  require_batch(batch, data_->size());
  const auto p1 = static_cast<Eigen::Index>(data_->width()) + 1;
  const auto p = p1 - 1;
  RowMatrix g = RowMatrix::Zero(classes_, p1);
  for (std::size_t i : batch) {
    const Vector z = logits(w, i);
    Vector r = (z.array() - log_sum_exp(z)).exp();
    r(data_->labels[i]) -= 1.0;
    g.leftCols(p).noalias() += r * data_->features.row(static_cast<Eigen::Index>(i));
    g.col(p) += r;
  }
  g /= static_cast<double>(batch.size());
  return Eigen::Map<const Vector>(g.data(), g.size());
}

std::vector<GradientVector> SoftmaxRegressionProblem::per_sample_grads(const Vector& w, Batch batch) const {
  require_same_size(dim(), w.size(), "softmax: parameters");
  require_batch(batch, data_->size());
  const auto p1 = static_cast<Eigen::Index>(data_->width()) + 1;
  const auto p = p1 - 1;
  std::vector<GradientVector> out;
  out.reserve(batch.size());
  for (std::size_t i : batch) {
    const Vector z = logits(w, i);
    Vector r = (z.array() - log_sum_exp(z)).exp();
    r(data_->labels[i]) -= 1.0;
    RowMatrix g(classes_, p1);
    g.leftCols(p) = r * data_->features.row(static_cast<Eigen::Index>(i));
    g.col(p) = r;
    out.emplace_back(Eigen::Map<const Vector>(g.data(), g.size()));
  }
  return out;
}

std::optional<double> SoftmaxRegressionProblem::accuracy(const Vector& w, Batch batch) const {
  require_same_size(dim(), w.size(), "softmax: parameters");
  require_batch(batch, data_->size());
  std::size_t correct = 0;
  for (std::size_t i : batch) {
    const Vector z = logits(w, i);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < z.size(); ++c) {
      if (z(c) > z(best)) best = c;
    }
    if (best == data_->labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

SoftmaxRegressionProblem softmax_regression_problem(std::shared_ptr<const Dataset> data, int num_classes) {
  return SoftmaxRegressionProblem(std::move(data), num_classes);
}

}  // namespace sofim::problems
