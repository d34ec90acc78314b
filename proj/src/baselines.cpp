#include "sofim/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sofim::baselines {
namespace {

void require_finite(const Eigen::Ref<const Vector>& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string(what) + " contains NaN or Inf");
}

}  // namespace

void SgdConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta", "must be a finite value > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum", "must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("weight_decay", "must be a finite value >= 0");
  }
  if (schedule.kind == LearningRateSchedule::Kind::kCosine && schedule.total_steps < 1) {
    throw ConfigError("total_steps", "cosine schedule needs total_steps >= 1");
  }
}

double learning_rate(const SgdConfig& cfg, std::int64_t step_index) {
  if (cfg.schedule.kind == LearningRateSchedule::Kind::kConstant) return cfg.eta;
  const auto total = cfg.schedule.total_steps;
  const auto s = std::clamp<std::int64_t>(step_index, 0, total);
  if (s == total) return 0.0;
  const double frac = static_cast<double>(s) / static_cast<double>(total);
  return 0.5 * cfg.eta * (1.0 + std::cos(std::numbers::pi * frac));
}

SgdStepResult sgd_momentum_step(const ParamVector& w, const Vector& velocity, const GradientVector& g,
                                const SgdConfig& cfg, std::int64_t step_index) {
  cfg.validate();
  require_same_size(w.size(), velocity.size(), "sgd_momentum_step: velocity");
  require_same_size(w.size(), g.size(), "sgd_momentum_step: gradient");
  const double eta = learning_rate(cfg, step_index);
  Vector v = cfg.momentum * velocity + (g + cfg.weight_decay * w);
  ParamVector updated = w - eta * v;
  return {std::move(updated), std::move(v)};
}

SgdMomentumOptimizer::SgdMomentumOptimizer(Eigen::Index dim, const SgdConfig& cfg)
    : cfg_(cfg), velocity_(Vector::Zero(dim)) {
  cfg_.validate();
}

void SgdMomentumOptimizer::step(Eigen::Ref<Vector> w, const Eigen::Ref<const Vector>& g) {
  const Eigen::Index d = velocity_.size();
  require_same_size(d, w.size(), "SgdMomentumOptimizer::step: parameters");
  require_same_size(d, g.size(), "SgdMomentumOptimizer::step: gradient");
  const double eta = learning_rate(cfg_, step_);
  const double mu = cfg_.momentum;
  const double wd = cfg_.weight_decay;
  double* v = velocity_.data();
  double* wp = w.data();
  const double* gp = g.data();
  for (Eigen::Index i = 0; i < d; ++i) {
    v[i] = mu * v[i] + (gp[i] + wd * wp[i]);
    wp[i] -= eta * v[i];
  }
  ++step_;
}

void AdamConfig::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta", "must be a finite value > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be > 0");
}

AdamStepResult adam_step(const ParamVector& w, const Vector& m, const Vector& v, const GradientVector& g,
                         const AdamConfig& cfg, std::int64_t t) {
  cfg.validate();
  if (t < 1) throw PreconditionError("adam_step: t must be >= 1");
  require_same_size(w.size(), m.size(), "adam_step: m");
  require_same_size(w.size(), v.size(), "adam_step: v");
  require_same_size(w.size(), g.size(), "adam_step: gradient");

  Vector m_next = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  Vector v_next = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const Vector m_hat = m_next / c1;
  const Vector v_hat = v_next / c2;
  ParamVector updated = w - cfg.eta * (m_hat.array() / (v_hat.array().sqrt() + cfg.epsilon)).matrix();
  return {std::move(updated), std::move(m_next), std::move(v_next)};
}

AdamOptimizer::AdamOptimizer(Eigen::Index dim, const AdamConfig& cfg)
    : cfg_(cfg), m_(Vector::Zero(dim)), v_(Vector::Zero(dim)) {
  cfg_.validate();
}

void AdamOptimizer::step(Eigen::Ref<Vector> w, const Eigen::Ref<const Vector>& g) {
  const Eigen::Index d = m_.size();
  require_same_size(d, w.size(), "AdamOptimizer::step: parameters");
  require_same_size(d, g.size(), "AdamOptimizer::step: gradient");
  ++t_;
  beta1_power_ *= cfg_.beta1;
  beta2_power_ *= cfg_.beta2;
  const double c1 = 1.0 - beta1_power_;
  const double c2 = 1.0 - beta2_power_;
  for (Eigen::Index i = 0; i < d; ++i) {
    m_(i) = cfg_.beta1 * m_(i) + (1.0 - cfg_.beta1) * g(i);
    v_(i) = cfg_.beta2 * v_(i) + (1.0 - cfg_.beta2) * g(i) * g(i);
    w(i) -= cfg_.eta * (m_(i) / c1) / (std::sqrt(v_(i) / c2) + cfg_.epsilon);
  }
}

EmpiricalFim empirical_fim(std::span<const GradientVector> per_sample_grads, Eigen::Index cap) {
  if (per_sample_grads.empty()) throw PreconditionError("empirical_fim: no gradients");
  const Eigen::Index d = per_sample_grads.front().size();
  if (d > cap) {
    throw PreconditionError("empirical_fim: dimension " + std::to_string(d) + " exceeds the dense cap " +
                            std::to_string(cap));
  }
  Matrix f = Matrix::Zero(d, d);
  for (const auto& g : per_sample_grads) {
    require_same_size(d, g.size(), "empirical_fim: gradient");
    require_finite(g, "empirical_fim: gradient");
    f.selfadjointView<Eigen::Lower>().rankUpdate(g);
  }
  f /= static_cast<double>(per_sample_grads.size());
  // Mirror the lower triangle so the result is exactly symmetric.
  f.triangularView<Eigen::StrictlyUpper>() = f.transpose();
  return {std::move(f)};
}

ParamVector ngd_step(const ParamVector& w, std::span<const GradientVector> per_sample_grads, double eta,
                     double damping, Eigen::Index cap) {
  if (!(damping > 0.0)) throw PreconditionError("ngd_step: damping must be > 0");
  if (!(eta > 0.0)) throw PreconditionError("ngd_step: eta must be > 0");
  EmpiricalFim fim = empirical_fim(per_sample_grads, cap);
  require_same_size(fim.matrix.rows(), w.size(), "ngd_step: parameters");

  Vector mean = Vector::Zero(w.size());
  for (const auto& g : per_sample_grads) mean += g;
  mean /= static_cast<double>(per_sample_grads.size());

  fim.matrix.diagonal().array() += damping;
  const Eigen::LLT<Matrix> chol(fim.matrix);
  if (chol.info() != Eigen::Success) throw SingularityError("ngd_step: damped FIM is not positive definite");
  const Vector direction = chol.solve(mean);
  if (!direction.allFinite()) throw NumericError("ngd_step: non-finite direction");
  return w - eta * direction;
}

ParamVector newton_step_quadratic(const ParamVector& w, const problems::QuadraticProblem& problem, double eta) {
  if (!(eta > 0.0)) throw PreconditionError("newton_step_quadratic: eta must be > 0");
  const Matrix& a = problem.hessian();
  const Eigen::LLT<Matrix> chol(a);
  if (chol.info() != Eigen::Success) {
    throw PreconditionError("newton_step_quadratic: Hessian is not positive definite");
  }
  return w - eta * chol.solve(problem.gradient(w));
}

}  // namespace sofim::baselines
