#include "sofim/core.hpp"

#include <cmath>
#include <string>

namespace sofim {
namespace {

void require_finite(const Eigen::Ref<const Vector>& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string(what) + " contains NaN or Inf");
}

}  // namespace

void SofimConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta", "must be a finite value > 0");
  // rho <= 0 makes m m^T + rho*I indefinite or singular.
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("rho", "must be a finite value > 0");
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta", "must lie in [0, 1)");
}

SofimState::SofimState(Eigen::Index dim, const SofimConfig& config)
    : moment_(Vector::Zero(dim)), config_(config) {
  if (dim < 1) throw DimensionError("SofimState: dimension must be >= 1");
  config_.validate();
}

SofimState first_moment_update(const SofimState& state, const GradientVector& g) {
  require_same_size(state.dim(), g.size(), "first_moment_update: gradient");
  require_finite(g, "first_moment_update: gradient");

  const double beta = state.config().beta;
  SofimState next = state;
  next.moment_ = beta * state.moment_ + (1.0 - beta) * g;
  next.step_ = state.step_ + 1;
  next.beta_power_ = state.beta_power_ * beta;
  return next;
}

GradientVector bias_correct(const SofimState& state) {
  if (state.step() < 1) {
    throw PreconditionError("bias_correct: step must be >= 1 (1 - beta^0 is zero)");
  }
  // Once beta^t underflows relative to 1 the denominator is exactly 1.
  const double denom = 1.0 - state.beta_power();
  return state.moment() / denom;
}

Vector sherman_morrison_inverse_apply(double a_diag, const Vector& u, const Vector& v,
                                      const Vector& b) {
  if (!(a_diag > 0.0)) throw PreconditionError("sherman_morrison_inverse_apply: a_diag must be > 0");
  require_same_size(u.size(), v.size(), "sherman_morrison_inverse_apply: v");
  require_same_size(u.size(), b.size(), "sherman_morrison_inverse_apply: b");

  // A^{-1} = I / a_diag, so every A^{-1}x is a scalar multiple of x.
  const double inv_a = 1.0 / a_diag;
  const double denom = 1.0 + inv_a * v.dot(u);
  if (!std::isfinite(denom) || std::abs(denom) < kShermanMorrisonTolerance) {
    throw SingularityError("sherman_morrison_inverse_apply: 1 + v^T A^{-1} u is singular");
  }
  const double coeff = inv_a * v.dot(b) / denom;
  Vector out = inv_a * b - (inv_a * coeff) * u;
  if (!out.allFinite()) throw NumericError("sherman_morrison_inverse_apply: non-finite result");
  return out;
}

Vector sofim_direction(const GradientVector& m_hat, double rho) {
  if (!(rho > 0.0)) throw PreconditionError("sofim_direction: rho must be > 0");
  require_finite(m_hat, "sofim_direction: m_hat");

  const double sq_norm = m_hat.squaredNorm();
  if (!std::isfinite(sq_norm)) throw NumericError("sofim_direction: |m_hat|^2 overflowed");

  // Sherman-Morrison with A = rho*I and u = v = b = m_hat. Writing
  // k = m^T m / rho, the formula reads (m/rho) - (m/rho) * k/(1+k), which is
  // (m/rho) / (1+k). The factored form avoids cancellation when k >> 1.
  const double k = sq_norm / rho;
  return m_hat * (1.0 / (rho * (1.0 + k)));
}

SofimStepResult sofim_step(const ParamVector& w, const SofimState& state, const GradientVector& g) {
  require_same_size(state.dim(), w.size(), "sofim_step: parameters");
  SofimState next = first_moment_update(state, g);
  const GradientVector m_hat = bias_correct(next);
  const Vector direction = sofim_direction(m_hat, next.config().rho);
  ParamVector updated = w - next.config().eta * direction;
  return {std::move(updated), std::move(next)};
}

SofimOptimizer::SofimOptimizer(Eigen::Index dim, const SofimConfig& config)
    : state_(dim, config) {}

void SofimOptimizer::step(Eigen::Ref<Vector> w, const Eigen::Ref<const Vector>& g) {
  const Eigen::Index d = state_.dim();
  require_same_size(d, w.size(), "SofimOptimizer::step: parameters");
  require_same_size(d, g.size(), "SofimOptimizer::step: gradient");
  require_finite(g, "SofimOptimizer::step: gradient");

  const SofimConfig& cfg = state_.config_;
  const double beta = cfg.beta;
  const double one_minus_beta = 1.0 - beta;
  const double next_beta_power = state_.beta_power_ * beta;
  const double denom = 1.0 - next_beta_power;

  double* m = state_.moment_.data();
  const double* gp = g.data();
  double sq_norm = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    m[i] = beta * m[i] + one_minus_beta * gp[i];
    const double m_hat = m[i] / denom;
    sq_norm += m_hat * m_hat;
  }
  if (!std::isfinite(sq_norm)) throw NumericError("SofimOptimizer::step: |m_hat|^2 overflowed");

  const double scale = cfg.eta * (1.0 / (cfg.rho * (1.0 + sq_norm / cfg.rho)));
  double* wp = w.data();
  for (Eigen::Index i = 0; i < d; ++i) wp[i] -= scale * (m[i] / denom);

  state_.step_ += 1;
  state_.beta_power_ = next_beta_power;
}

}  // namespace sofim
