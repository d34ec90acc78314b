#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sofim/common.hpp"
#include "sofim/dataset.hpp"

namespace sofim::problems {

using Batch = std::span<const std::size_t>;

/// Empirical loss P(w) = (1/|B|) sum_{i in B} p_i(w) over a batch of sample
/// indices, with its analytic gradient.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index dim() const = 0;

  virtual double loss(const Vector& w, Batch batch) const = 0;
  virtual GradientVector grad(const Vector& w, Batch batch) const = 0;
  virtual std::vector<GradientVector> per_sample_grads(const Vector& w, Batch batch) const = 0;

  virtual std::optional<Matrix> exact_hessian(const Vector&) const { return std::nullopt; }

  /// Fraction of argmax-correct predictions (ties go to the lowest class),
  /// or nullopt for problems without labels.
  virtual std::optional<double> accuracy(const Vector&, Batch) const { return std::nullopt; }

  /// Starting point shared by every optimizer run on this problem.
  virtual ParamVector initial_params() const { return ParamVector::Zero(dim()); }

  virtual std::span<const std::size_t> train_indices() const = 0;
  virtual std::span<const std::size_t> test_indices() const = 0;
};

// ---------------------------------------------------------------------------
// Quadratic
// ---------------------------------------------------------------------------

/// P(w) = 1/2 (w - w*)^T A (w - w*). The batch is ignored: every sample index
/// carries the same loss, so there is a single sample 0 in both splits.
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(Matrix a, ParamVector w_star);

  std::string name() const override { return "quadratic"; }
  Eigen::Index dim() const override { return w_star_.size(); }

  double loss(const Vector& w, Batch batch) const override;
  GradientVector grad(const Vector& w, Batch batch) const override;
  std::vector<GradientVector> per_sample_grads(const Vector& w, Batch batch) const override;
  std::optional<Matrix> exact_hessian(const Vector& w) const override;

  std::span<const std::size_t> train_indices() const override { return split_; }
  std::span<const std::size_t> test_indices() const override { return split_; }

  double value(const Vector& w) const;
  GradientVector gradient(const Vector& w) const;

  const Matrix& hessian() const noexcept { return a_; }
  const ParamVector& minimizer() const noexcept { return w_star_; }

 private:
  Matrix a_;
  ParamVector w_star_;
  std::vector<std::size_t> split_{0};
};

/// Random rotation of eigenvalues spread log-uniformly over [1, condition_number]
/// (both endpoints included when d >= 2). Deterministic in seed.
QuadraticProblem make_quadratic(Eigen::Index d, double condition_number, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Linear classifiers. Both append a constant-1 feature for the bias, so with
// p raw features logistic has d = p + 1 and softmax has d = (p + 1) * C.
// ---------------------------------------------------------------------------

class LogisticRegressionProblem final : public Problem {
 public:
  explicit LogisticRegressionProblem(std::shared_ptr<const Dataset> data);

  std::string name() const override { return "logistic"; }
  Eigen::Index dim() const override { return static_cast<Eigen::Index>(data_->width()) + 1; }

  double loss(const Vector& w, Batch batch) const override;
  GradientVector grad(const Vector& w, Batch batch) const override;
  std::vector<GradientVector> per_sample_grads(const Vector& w, Batch batch) const override;
  std::optional<double> accuracy(const Vector& w, Batch batch) const override;

  std::span<const std::size_t> train_indices() const override { return data_->train; }
  std::span<const std::size_t> test_indices() const override { return data_->test; }

  const Dataset& data() const noexcept { return *data_; }
  /// sigma(w^T [x_i, 1]).
  double probability(const Vector& w, std::size_t i) const;

 private:
  double margin(const Vector& w, std::size_t i) const;

  std::shared_ptr<const Dataset> data_;
};

LogisticRegressionProblem logistic_regression_problem(std::shared_ptr<const Dataset> data);

/// Parameters are a C x (p+1) matrix W flattened row-major: class c owns
/// entries [c*(p+1), (c+1)*(p+1)), the last of which is its bias.
class SoftmaxRegressionProblem final : public Problem {
 public:
  SoftmaxRegressionProblem(std::shared_ptr<const Dataset> data, int num_classes);

  std::string name() const override { return "softmax"; }
  Eigen::Index dim() const override { return (static_cast<Eigen::Index>(data_->width()) + 1) * classes_; }

  double loss(const Vector& w, Batch batch) const override;
  GradientVector grad(const Vector& w, Batch batch) const override;
  std::vector<GradientVector> per_sample_grads(const Vector& w, Batch batch) const override;
  std::optional<double> accuracy(const Vector& w, Batch batch) const override;

  std::span<const std::size_t> train_indices() const override { return data_->train; }
  std::span<const std::size_t> test_indices() const override { return data_->test; }

  /// Class probabilities of sample i.
  Vector probabilities(const Vector& w, std::size_t i) const;

 private:
  Vector logits(const Vector& w, std::size_t i) const;

  std::shared_ptr<const Dataset> data_;
  int classes_;
};

SoftmaxRegressionProblem softmax_regression_problem(std::shared_ptr<const Dataset> data,
                                                    int num_classes);

// ---------------------------------------------------------------------------
// One-hidden-layer perceptron with softmax cross-entropy.
// ---------------------------------------------------------------------------

enum class Activation { kTanh, kRelu };

struct MlpSpec {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;
  Activation activation = Activation::kTanh;

  std::size_t param_count() const noexcept { return hidden * inputs + hidden + classes * hidden + classes; }
};

/// Unflattened MLP parameters. Flat order: W1 (h x p, row-major), b1, W2
/// (C x h, row-major), b2.
struct MlpParams {
  RowMatrix w1;
  Vector b1;
  RowMatrix w2;
  Vector b2;

  static MlpParams unflatten(const MlpSpec& spec, const Vector& flat);
  Vector flatten() const;
};

class MlpProblem final : public Problem {
 public:
  MlpProblem(std::shared_ptr<const Dataset> data, const MlpSpec& spec, std::uint64_t init_seed);

  std::string name() const override { return "mlp"; }
  Eigen::Index dim() const override { return static_cast<Eigen::Index>(spec_.param_count()); }

  double loss(const Vector& w, Batch batch) const override;
  GradientVector grad(const Vector& w, Batch batch) const override;
  std::vector<GradientVector> per_sample_grads(const Vector& w, Batch batch) const override;
  std::optional<double> accuracy(const Vector& w, Batch batch) const override;

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, weights and
  /// biases alike, drawn from init_seed.
  ParamVector initial_params() const override;

  std::span<const std::size_t> train_indices() const override { return data_->train; }
  std::span<const std::size_t> test_indices() const override { return data_->test; }

  const MlpSpec& spec() const noexcept { return spec_; }

  /// Hidden-layer pre-activations (|batch| x h) at w.
  RowMatrix hidden_preactivations(const Vector& w, Batch batch) const;

 private:
  struct Forward;
  Forward forward(const MlpParams& p, Batch batch) const;
  GradientVector backward(const MlpParams& p, const Forward& fw, Batch batch) const;

  std::shared_ptr<const Dataset> data_;
  MlpSpec spec_;
  std::uint64_t init_seed_;
};

MlpProblem mlp_problem(std::shared_ptr<const Dataset> data, const MlpSpec& spec, std::uint64_t init_seed);

/// Numerically stable log(sum(exp(z))).
double log_sum_exp(const Eigen::Ref<const Vector>& z);

}  // namespace sofim::problems
