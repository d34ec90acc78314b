#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sofim/common.hpp"
#include "sofim/problems.hpp"

namespace sofim::baselines {

// ---------------------------------------------------------------------------
// SGD with momentum
// ---------------------------------------------------------------------------

struct LearningRateSchedule {
  enum class Kind { kConstant, kCosine };
  Kind kind = Kind::kConstant;
  std::int64_t total_steps = 0;  // cosine only

  static LearningRateSchedule constant() { return {}; }
  static LearningRateSchedule cosine(std::int64_t total_steps) { return {Kind::kCosine, total_steps}; }
};

struct SgdConfig {
  double eta = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  LearningRateSchedule schedule;

  void validate() const;
};

/// eta(s). Cosine annealing to zero: eta0 * (1 + cos(pi * s / S)) / 2, with s
/// clamped to [0, S].
double learning_rate(const SgdConfig& cfg, std::int64_t step_index);

struct SgdStepResult {
  ParamVector params;
  Vector velocity;
};

/// g' = g + wd*w; v' = momentum*v + g'; w' = w - eta(step_index)*v'.
SgdStepResult sgd_momentum_step(const ParamVector& w, const Vector& velocity, const GradientVector& g,
                                const SgdConfig& cfg, std::int64_t step_index);

/// In-place SGD-momentum for the training loop.
class SgdMomentumOptimizer {
 public:
  SgdMomentumOptimizer(Eigen::Index dim, const SgdConfig& cfg);

  void step(Eigen::Ref<Vector> w, const Eigen::Ref<const Vector>& g);

  std::int64_t steps_taken() const noexcept { return step_; }
  const Vector& velocity() const noexcept { return velocity_; }

 private:
  SgdConfig cfg_;
  Vector velocity_;
  std::int64_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double eta = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamStepResult {
  ParamVector params;
  Vector m;
  Vector v;
};

/// Standard Adam step; `t` is the 1-based index of this step.
AdamStepResult adam_step(const ParamVector& w, const Vector& m, const Vector& v, const GradientVector& g,
                         const AdamConfig& cfg, std::int64_t t);

class AdamOptimizer {
 public:
  AdamOptimizer(Eigen::Index dim, const AdamConfig& cfg);

  void step(Eigen::Ref<Vector> w, const Eigen::Ref<const Vector>& g);

 private:
  AdamConfig cfg_;
  Vector m_;
  Vector v_;
  std::int64_t t_ = 0;
  double beta1_power_ = 1.0;
  double beta2_power_ = 1.0;
};

// ---------------------------------------------------------------------------
// Dense oracles. These form d x d matrices and are refused above a small cap.
// ---------------------------------------------------------------------------

inline constexpr Eigen::Index kDefaultDenseCap = 200;
inline constexpr double kDefaultNgdDamping = 1e-3;

/// (1/B) sum_i g_i g_i^T.
struct EmpiricalFim {
  Matrix matrix;
};

EmpiricalFim empirical_fim(std::span<const GradientVector> per_sample_grads,
                           Eigen::Index cap = kDefaultDenseCap);

/// w - eta * (F + damping*I)^{-1} g_mean, solved densely.
ParamVector ngd_step(const ParamVector& w, std::span<const GradientVector> per_sample_grads, double eta,
                     double damping = kDefaultNgdDamping, Eigen::Index cap = kDefaultDenseCap);

/// w - eta * A^{-1} grad P(w). Throws PreconditionError if A is not positive definite.
ParamVector newton_step_quadratic(const ParamVector& w, const problems::QuadraticProblem& problem,
                                  double eta);

}  // namespace sofim::baselines
