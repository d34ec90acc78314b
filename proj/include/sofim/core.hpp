#pragma once

#include <cstdint>

#include "sofim/common.hpp"

namespace sofim {

/// Hyperparameters of the SOFIM update.
struct SofimConfig {
  double eta = 0.1;   ///< learning rate, > 0
  double rho = 0.5;   ///< regularizer of the rank-one Fisher matrix, > 0
  double beta = 0.9;  ///< first-moment decay, in [0, 1)

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// First-moment state of one SOFIM run.
///
/// `beta_power()` is beta^step, maintained as a running product so the bias
/// correction costs O(1) per step.
class SofimState {
 public:
  SofimState(Eigen::Index dim, const SofimConfig& config);

  const Vector& moment() const noexcept { return moment_; }
  std::int64_t step() const noexcept { return step_; }
  double beta_power() const noexcept { return beta_power_; }
  const SofimConfig& config() const noexcept { return config_; }
  Eigen::Index dim() const noexcept { return moment_.size(); }

 private:
  friend SofimState first_moment_update(const SofimState&, const GradientVector&);
  friend class SofimOptimizer;

  Vector moment_;
  std::int64_t step_ = 0;
  double beta_power_ = 1.0;
  SofimConfig config_;
};

/// M' = beta*M + (1-beta)*g, step' = step + 1.
SofimState first_moment_update(const SofimState& state, const GradientVector& g);

/// M / (1 - beta^t). Requires step >= 1.
GradientVector bias_correct(const SofimState& state);

/// Denominators |1 + v^T A^{-1} u| below this are rejected as singular.
inline constexpr double kShermanMorrisonTolerance = 1e-12;

/// Applies (a_diag*I + u v^T)^{-1} to b in O(d) without forming a matrix.
Vector sherman_morrison_inverse_apply(double a_diag, const Vector& u, const Vector& v,
                                      const Vector& b);

/// F^{-1} m_hat with F = m_hat m_hat^T + rho*I; equal to m_hat / (rho + |m_hat|^2).
Vector sofim_direction(const GradientVector& m_hat, double rho);

struct SofimStepResult {
  ParamVector params;
  SofimState state;
};

/// One full iteration: moment update, bias correction, direction, w - eta*direction.
SofimStepResult sofim_step(const ParamVector& w, const SofimState& state, const GradientVector& g);

/// Allocation-free SOFIM. Owns its state and updates parameters in place;
/// produces the same iterates as chaining sofim_step up to rounding.
class SofimOptimizer {
 public:
  SofimOptimizer(Eigen::Index dim, const SofimConfig& config);

  void step(Eigen::Ref<Vector> w, const Eigen::Ref<const Vector>& g);

  const SofimState& state() const noexcept { return state_; }

 private:
  SofimState state_;
};

}  // namespace sofim
