#include "sofim/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sofim/baselines.hpp"

namespace sofim::harness {
namespace {

using problems::Batch;
using problems::Problem;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Uniform interface over the optimizers the loop can drive.
class StepRule {
 public:
  virtual ~StepRule() = default;
  virtual void step(Vector& w, const Problem& problem, Batch batch, const GradientVector& g) = 0;
};

class SofimRule final : public StepRule {
 public:
  SofimRule(Eigen::Index d, const OptimizerSpec& s) : opt_(d, SofimConfig{s.eta, s.rho, s.beta}) {}
  void step(Vector& w, const Problem&, Batch, const GradientVector& g) override { opt_.step(w, g); }

 private:
  SofimOptimizer opt_;
};

class SgdRule final : public StepRule {
 public:
  SgdRule(Eigen::Index d, const baselines::SgdConfig& cfg) : opt_(d, cfg) {}
  void step(Vector& w, const Problem&, Batch, const GradientVector& g) override { opt_.step(w, g); }

 private:
  baselines::SgdMomentumOptimizer opt_;
};

class AdamRule final : public StepRule {
 public:
  AdamRule(Eigen::Index d, const OptimizerSpec& s) : opt_(d, {s.eta, s.beta1, s.beta2, s.epsilon}) {}
  void step(Vector& w, const Problem&, Batch, const GradientVector& g) override { opt_.step(w, g); }

 private:
  baselines::AdamOptimizer opt_;
};

class NgdRule final : public StepRule {
 public:
  explicit NgdRule(const OptimizerSpec& s) : eta_(s.eta), damping_(s.damping) {}
  void step(Vector& w, const Problem& problem, Batch batch, const GradientVector&) override {
    const auto grads = problem.per_sample_grads(w, batch);
    w = baselines::ngd_step(w, grads, eta_, damping_);
  }

 private:
  double eta_;
  double damping_;
};

class NewtonRule final : public StepRule {
 public:
  NewtonRule(const problems::QuadraticProblem& q, double eta) : problem_(q), eta_(eta) {}
  void step(Vector& w, const Problem&, Batch, const GradientVector&) override {
    w = baselines::newton_step_quadratic(w, problem_, eta_);
  }

 private:
  const problems::QuadraticProblem& problem_;
  double eta_;
};

baselines::SgdConfig sgd_config(const ExperimentConfig& cfg) {
  baselines::SgdConfig out;
  out.eta = cfg.optimizer.eta;
  out.momentum = cfg.optimizer.momentum;
  out.weight_decay = cfg.optimizer.weight_decay;
  out.schedule = cfg.optimizer.cosine_schedule
                     ? baselines::LearningRateSchedule::cosine(cfg.total_iterations)
                     : baselines::LearningRateSchedule::constant();
  return out;
}

std::unique_ptr<StepRule> make_rule(const ExperimentConfig& cfg, const Problem& problem) {
  const OptimizerSpec& s = cfg.optimizer;
  const Eigen::Index d = problem.dim();
  switch (s.id) {
    case OptimizerId::kSofim:
      return std::make_unique<SofimRule>(d, s);
    case OptimizerId::kSgdMomentum:
      return std::make_unique<SgdRule>(d, sgd_config(cfg));
    case OptimizerId::kAdam:
      return std::make_unique<AdamRule>(d, s);
    case OptimizerId::kNgdOracle:
      if (d > baselines::kDefaultDenseCap) {
        throw ConfigError("optimizer", "ngd_oracle is limited to d <= " +
                                           std::to_string(baselines::kDefaultDenseCap) + " (problem has d = " +
                                           std::to_string(d) + ")");
      }
      return std::make_unique<NgdRule>(s);
    case OptimizerId::kNewtonOracle: {
      const auto* q = dynamic_cast<const problems::QuadraticProblem*>(&problem);
      if (q == nullptr) throw ConfigError("optimizer", "newton_oracle needs a quadratic problem");
      return std::make_unique<NewtonRule>(*q, s.eta);
    }
  }
  throw ConfigError("optimizer", "unknown optimizer");
}

bool bad_loss(double v) { return !std::isfinite(v) || v > kDivergenceLoss; }

}  // namespace

std::string to_string(OptimizerId id) {
  switch (id) {
    case OptimizerId::kSofim: return "sofim";
    case OptimizerId::kSgdMomentum: return "sgd_momentum";
    case OptimizerId::kAdam: return "adam";
    case OptimizerId::kNgdOracle: return "ngd_oracle";
    case OptimizerId::kNewtonOracle: return "newton_oracle";
  }
  return "unknown";
}

OptimizerId parse_optimizer_id(const std::string& name) {
  for (auto id : {OptimizerId::kSofim, OptimizerId::kSgdMomentum, OptimizerId::kAdam, OptimizerId::kNgdOracle,
                  OptimizerId::kNewtonOracle}) {
    if (to_string(id) == name) return id;
  }
  throw ConfigError("optimizer", "unknown optimizer '" + name + "'");
}

std::string to_string(ProblemSpec::Kind kind) {
  switch (kind) {
    case ProblemSpec::Kind::kQuadratic: return "quadratic";
    case ProblemSpec::Kind::kLogistic: return "logistic";
    case ProblemSpec::Kind::kSoftmax: return "softmax";
    case ProblemSpec::Kind::kMlp: return "mlp";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (total_iterations < 1) throw ConfigError("iterations", "must be >= 1");
  if (eval_every < 1 || eval_every > total_iterations) {
    throw ConfigError("eval_every", "must lie in [1, iterations]");
  }
  for (double t : loss_thresholds) {
    if (!std::isfinite(t)) throw ConfigError("loss_thresholds", "must be finite");
  }

  const ProblemSpec& p = problem;
  if (p.kind == ProblemSpec::Kind::kQuadratic) {
    if (p.dim < 1) throw ConfigError("problem.dim", "must be >= 1");
    if (!(p.condition_number >= 1.0)) throw ConfigError("problem.condition_number", "must be >= 1");
  } else {
    const DatasetSpec& data = p.data;
    if (data.kind == DatasetSpec::Kind::kBlobs) {
      if (data.classes < 2) throw ConfigError("problem.dataset.classes", "must be >= 2");
      if (data.samples < static_cast<std::size_t>(data.classes)) {
        throw ConfigError("problem.dataset.samples", "must be >= classes");
      }
      if (data.features < 1) throw ConfigError("problem.dataset.features", "must be >= 1");
      if (p.kind == ProblemSpec::Kind::kLogistic && data.classes != 2) {
        throw ConfigError("problem.dataset.classes", "logistic regression needs exactly 2 classes");
      }
    } else if (data.path.empty()) {
      throw ConfigError("problem.dataset.path", "required for csv datasets");
    }
    if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
      throw ConfigError("problem.dataset.train_fraction", "must lie in (0, 1)");
    }
    if (p.kind == ProblemSpec::Kind::kMlp && p.hidden < 1) throw ConfigError("problem.hidden", "must be >= 1");
  }

  const OptimizerSpec& o = optimizer;
  try {
    switch (o.id) {
      case OptimizerId::kSofim:
        SofimConfig{o.eta, o.rho, o.beta}.validate();
        break;
      case OptimizerId::kSgdMomentum: {
        baselines::SgdConfig sgd{o.eta, o.momentum, o.weight_decay,
                                 baselines::LearningRateSchedule::cosine(total_iterations)};
        sgd.validate();
        break;
      }
      case OptimizerId::kAdam:
        baselines::AdamConfig{o.eta, o.beta1, o.beta2, o.epsilon}.validate();
        break;
      case OptimizerId::kNgdOracle:
        if (!(o.eta > 0.0)) throw ConfigError("eta", "must be > 0");
        if (!(o.damping > 0.0)) throw ConfigError("damping", "must be > 0");
        break;
      case OptimizerId::kNewtonOracle:
        if (!(o.eta > 0.0)) throw ConfigError("eta", "must be > 0");
        if (p.kind != ProblemSpec::Kind::kQuadratic) {
          throw ConfigError("optimizer", "newton_oracle needs a quadratic problem");
        }
        break;
    }
  } catch (const ConfigError& e) {
    if (e.field() == "optimizer") throw;
    throw ConfigError("hyperparameters." + e.field(), e.message());
  }
}

std::string canonical_string(const ExperimentConfig& cfg) {
  std::ostringstream os;
  const ProblemSpec& p = cfg.problem;
  os << "problem.kind=" << to_string(p.kind) << '\n';
  if (p.kind == ProblemSpec::Kind::kQuadratic) {
    os << "problem.dim=" << p.dim << '\n'
       << "problem.condition_number=" << fmt_double(p.condition_number) << '\n'
       << "problem.seed=" << p.quadratic_seed << '\n';
  } else {
    const DatasetSpec& d = p.data;
    if (d.kind == DatasetSpec::Kind::kBlobs) {
      os << "dataset.kind=blobs\n"
         << "dataset.samples=" << d.samples << '\n'
         << "dataset.features=" << d.features << '\n'
         << "dataset.classes=" << d.classes << '\n'
         << "dataset.spread=" << fmt_double(d.spread) << '\n'
         << "dataset.seed=" << d.seed << '\n';
    } else {
      os << "dataset.kind=csv\n"
         << "dataset.path=" << d.path << '\n'
         << "dataset.label_column=" << d.label_column << '\n'
         << "dataset.seed=" << d.seed << '\n';
    }
    os << "dataset.train_fraction=" << fmt_double(d.train_fraction) << '\n';
    if (p.kind == ProblemSpec::Kind::kMlp) {
      os << "problem.hidden=" << p.hidden << '\n'
         << "problem.activation=" << (p.activation == problems::Activation::kTanh ? "tanh" : "relu") << '\n';
    }
  }
  const OptimizerSpec& o = cfg.optimizer;
  os << "optimizer=" << to_string(o.id) << '\n' << "eta=" << fmt_double(o.eta) << '\n';
  switch (o.id) {
    case OptimizerId::kSofim:
      os << "rho=" << fmt_double(o.rho) << "\nbeta=" << fmt_double(o.beta) << '\n';
      break;
    case OptimizerId::kSgdMomentum:
      os << "momentum=" << fmt_double(o.momentum) << "\nweight_decay=" << fmt_double(o.weight_decay)
         << "\ncosine_schedule=" << (o.cosine_schedule ? "true" : "false") << '\n';
      break;
    case OptimizerId::kAdam:
      os << "beta1=" << fmt_double(o.beta1) << "\nbeta2=" << fmt_double(o.beta2)
         << "\nepsilon=" << fmt_double(o.epsilon) << '\n';
      break;
    case OptimizerId::kNgdOracle:
      os << "damping=" << fmt_double(o.damping) << '\n';
      break;
    case OptimizerId::kNewtonOracle:
      break;
  }
  os << "batch_size=" << cfg.batch_size << '\n'
     << "iterations=" << cfg.total_iterations << '\n'
     << "eval_every=" << cfg.eval_every << '\n'
     << "seed=" << cfg.seed << '\n';
  os << "loss_thresholds=";
  for (std::size_t i = 0; i < cfg.loss_thresholds.size(); ++i) {
    os << (i ? "," : "") << fmt_double(cfg.loss_thresholds[i]);
  }
  os << '\n';
  return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_string(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::shared_ptr<const Problem> build_problem(const ProblemSpec& spec, std::uint64_t init_seed) {
  if (spec.kind == ProblemSpec::Kind::kQuadratic) {
    return std::make_shared<const problems::QuadraticProblem>(
        problems::make_quadratic(spec.dim, spec.condition_number, spec.quadratic_seed));
  }
  const DatasetSpec& d = spec.data;
  auto data = std::make_shared<const problems::Dataset>(
      d.kind == DatasetSpec::Kind::kBlobs
          ? problems::make_blobs(d.samples, d.features, d.classes, d.spread, d.seed)
          : problems::load_csv_dataset(d.path, d.label_column, d.train_fraction, d.seed));
  switch (spec.kind) {
    case ProblemSpec::Kind::kLogistic:
      return std::make_shared<const problems::LogisticRegressionProblem>(data);
    case ProblemSpec::Kind::kSoftmax:
      return std::make_shared<const problems::SoftmaxRegressionProblem>(data, data->num_classes);
    case ProblemSpec::Kind::kMlp: {
      const problems::MlpSpec mlp{data->width(), spec.hidden, static_cast<std::size_t>(data->num_classes),
                                  spec.activation};
      return std::make_shared<const problems::MlpProblem>(data, mlp, init_seed);
    }
    case ProblemSpec::Kind::kQuadratic:
      break;
  }
  throw ConfigError("problem.kind", "unsupported problem");
}

std::optional<std::int64_t> iterations_to_reach(const RunRecord& record, double threshold) {
  for (const MetricRow& row : record.rows) {
    if (row.train_loss <= threshold) return row.iteration;
  }
  return std::nullopt;
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto problem = build_problem(cfg.problem, cfg.seed);
  return run_experiment(cfg, *problem);
}

RunRecord run_experiment(const ExperimentConfig& cfg, const Problem& problem) {
  using Clock = std::chrono::steady_clock;
  cfg.validate();

  RunRecord record;
  record.problem = problem.name();
  record.optimizer = cfg.optimizer.id;

  auto rule = make_rule(cfg, problem);
  Vector w = problem.initial_params();
  const auto train = problem.train_indices();
  const auto test = problem.test_indices();
  if (train.empty()) throw ConfigError("problem.dataset", "train split is empty");
  problems::BatchSampler sampler(std::vector<std::size_t>(train.begin(), train.end()), cfg.batch_size,
                                 cfg.seed ^ 0xA24BAED4963EE407ULL);

  auto diverge = [&record](std::int64_t t, std::string reason) {
    record.diverged = true;
    record.diverged_at = t;
    record.divergence_reason = std::move(reason);
  };

  Clock::duration elapsed{};
  for (std::int64_t t = 1; t <= cfg.total_iterations; ++t) {
    const auto start = Clock::now();
    const auto batch = sampler.next();
    const double batch_loss = problem.loss(w, batch);
    if (bad_loss(batch_loss)) {
      diverge(t, "batch loss " + fmt_double(batch_loss));
      break;
    }
    try {
      const GradientVector g = problem.grad(w, batch);
      rule->step(w, problem, batch, g);
    } catch (const NumericError& e) {
      diverge(t, e.what());
      break;
    } catch (const SingularityError& e) {
      diverge(t, e.what());
      break;
    }
    elapsed += Clock::now() - start;
    if (!w.allFinite()) {
      diverge(t, "non-finite parameters");
      break;
    }

    if (t % cfg.eval_every != 0) continue;
    MetricRow row;
    row.iteration = t;
    row.epoch = static_cast<std::int64_t>(sampler.epoch());
    row.batch_loss = batch_loss;
    row.train_loss = problem.loss(w, train);
    row.test_loss = test.empty() ? row.train_loss : problem.loss(w, test);
    if (bad_loss(row.train_loss) || bad_loss(row.test_loss)) {
      diverge(t, "evaluation loss is non-finite or above threshold");
      break;
    }
    if (!test.empty()) row.test_accuracy = problem.accuracy(w, test);
    row.wall_ms = std::chrono::duration<double, std::milli>(elapsed).count();
    if (row.test_accuracy &&
        (!record.best_test_accuracy || *row.test_accuracy > *record.best_test_accuracy)) {
      record.best_test_accuracy = row.test_accuracy;
    }
    record.rows.push_back(row);
  }

  for (double threshold : cfg.loss_thresholds) {
    record.threshold_hits.push_back({threshold, iterations_to_reach(record, threshold)});
  }
  return record;
}

}  // namespace sofim::harness
