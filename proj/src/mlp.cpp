#include <cmath>
#include <random>

#include "sofim/problems.hpp"

namespace sofim::problems {

MlpParams MlpParams::unflatten(const MlpSpec& spec, const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != spec.param_count()) {
    throw DimensionError("MlpParams::unflatten: expected " + std::to_string(spec.param_count()) +
                         " parameters, got " + std::to_string(flat.size()));
  }
  const auto p = static_cast<Eigen::Index>(spec.inputs);
  const auto h = static_cast<Eigen::Index>(spec.hidden);
  const auto c = static_cast<Eigen::Index>(spec.classes);
  const double* ptr = flat.data();
  MlpParams out;
  out.w1 = Eigen::Map<const RowMatrix>(ptr, h, p);
  ptr += h * p;
  out.b1 = Eigen::Map<const Vector>(ptr, h);
  ptr += h;
  out.w2 = Eigen::Map<const RowMatrix>(ptr, c, h);
  ptr += c * h;
  out.b2 = Eigen::Map<const Vector>(ptr, c);
  return out;
}

Vector MlpParams::flatten() const {
  Vector flat(w1.size() + b1.size() + w2.size() + b2.size());
  double* ptr = flat.data();
  Eigen::Map<RowMatrix>(ptr, w1.rows(), w1.cols()) = w1;
  ptr += w1.size();
  Eigen::Map<Vector>(ptr, b1.size()) = b1;
  ptr += b1.size();
  Eigen::Map<RowMatrix>(ptr, w2.rows(), w2.cols()) = w2;
  ptr += w2.size();
  Eigen::Map<Vector>(ptr, b2.size()) = b2;
  return flat;
}

struct MlpProblem::Forward {
  RowMatrix x;       // B x p
  RowMatrix z1;      // B x h
  RowMatrix hidden;  // B x h
  RowMatrix z2;      // B x C
  Vector lse;        // B
};

MlpProblem::MlpProblem(std::shared_ptr<const Dataset> data, const MlpSpec& spec, std::uint64_t init_seed)
    : data_(std::move(data)), spec_(spec), init_seed_(init_seed) {
  if (!data_) throw PreconditionError("mlp: null dataset");
  data_->validate();
  if (spec_.inputs < 1 || spec_.hidden < 1 || spec_.classes < 1) {
    throw DimensionError("mlp: layer widths must be >= 1");
  }
  if (spec_.inputs != data_->width()) {
    throw DimensionError("mlp: input width " + std::to_string(spec_.inputs) +
                         " does not match dataset width " + std::to_string(data_->width()));
  }
  if (static_cast<int>(spec_.classes) < data_->num_classes) {
    throw DimensionError("mlp: fewer output classes than dataset classes");
  }
}

MlpProblem::Forward MlpProblem::forward(const MlpParams& p, Batch batch) const {
  if (batch.empty()) throw PreconditionError("empty batch");
  const auto b = static_cast<Eigen::Index>(batch.size());
  Forward fw;
  fw.x.resize(b, static_cast<Eigen::Index>(spec_.inputs));
  for (Eigen::Index r = 0; r < b; ++r) {
    const std::size_t i = batch[static_cast<std::size_t>(r)];
    if (i >= data_->size()) throw PreconditionError("batch index out of range");
    fw.x.row(r) = data_->features.row(static_cast<Eigen::Index>(i));
  }
  fw.z1.noalias() = fw.x * p.w1.transpose();
  fw.z1.rowwise() += p.b1.transpose();
  if (spec_.activation == Activation::kTanh) {
    fw.hidden = fw.z1.array().tanh();
  } else {
    fw.hidden = fw.z1.array().max(0.0);
  }
  fw.z2.noalias() = fw.hidden * p.w2.transpose();
  fw.z2.rowwise() += p.b2.transpose();
  fw.lse.resize(b);
  for (Eigen::Index r = 0; r < b; ++r) fw.lse(r) = log_sum_exp(fw.z2.row(r).transpose());
  return fw;
}

GradientVector MlpProblem::backward(const MlpParams& p, const Forward& fw, Batch batch) const {
  const auto b = fw.x.rows();
  RowMatrix dz2 = (fw.z2.colwise() - fw.lse).array().exp();
  for (Eigen::Index r = 0; r < b; ++r) dz2(r, data_->labels[batch[static_cast<std::size_t>(r)]]) -= 1.0;
  dz2 /= static_cast<double>(b);

  MlpParams g;
  g.w2.noalias() = dz2.transpose() * fw.hidden;
  g.b2 = dz2.colwise().sum().transpose();

  RowMatrix dz1 = dz2 * p.w2;
  if (spec_.activation == Activation::kTanh) {
    dz1.array() *= 1.0 - fw.hidden.array().square();
  } else {
    // Subgradient 0 at the kink.
    dz1.array() *= (fw.z1.array() > 0.0).cast<double>();
  }
  g.w1.noalias() = dz1.transpose() * fw.x;
  g.b1 = dz1.colwise().sum().transpose();
  return g.flatten();
}

double MlpProblem::loss(const Vector& w, Batch batch) const {
  const MlpParams p = MlpParams::unflatten(spec_, w);
  const Forward fw = forward(p, batch);
  double total = 0.0;
  for (Eigen::Index r = 0; r < fw.z2.rows(); ++r) {
    total += fw.lse(r) - fw.z2(r, data_->labels[batch[static_cast<std::size_t>(r)]]);
  }
  return total / static_cast<double>(batch.size());
}

GradientVector MlpProblem::grad(const Vector& w, Batch batch) const {
  const MlpParams p = MlpParams::unflatten(spec_, w);
  return backward(p, forward(p, batch), batch);
}

std::vector<GradientVector> MlpProblem::per_sample_grads(const Vector& w, Batch batch) const {
  const MlpParams p = MlpParams::unflatten(spec_, w);
  if (batch.empty()) throw PreconditionError("empty batch");
  std::vector<GradientVector> out;
  out.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Batch one = batch.subspan(k, 1);
    out.push_back(backward(p, forward(p, one), one));
  }
  return out;
}

std::optional<double> MlpProblem::accuracy(const Vector& w, Batch batch) const {
  const MlpParams p = MlpParams::unflatten(spec_, w);
  const Forward fw = forward(p, batch);
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < fw.z2.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < fw.z2.cols(); ++c) {
      if (fw.z2(r, c) > fw.z2(r, best)) best = c;
    }
    if (best == data_->labels[batch[static_cast<std::size_t>(r)]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

ParamVector MlpProblem::initial_params() const {
  std::mt19937_64 rng(init_seed_);
  const auto p = static_cast<Eigen::Index>(spec_.inputs);
  const auto h = static_cast<Eigen::Index>(spec_.hidden);
  const auto c = static_cast<Eigen::Index>(spec_.classes);
  auto fill = [&rng](auto& m, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  MlpParams params{RowMatrix(h, p), Vector(h), RowMatrix(c, h), Vector(c)};
  fill(params.w1, static_cast<double>(p));
  fill(params.b1, static_cast<double>(p));
  fill(params.w2, static_cast<double>(h));
  fill(params.b2, static_cast<double>(h));
  return params.flatten();
}

RowMatrix MlpProblem::hidden_preactivations(const Vector& w, Batch batch) const {
  return forward(MlpParams::unflatten(spec_, w), batch).z1;
}

MlpProblem mlp_problem(std::shared_ptr<const Dataset> data, const MlpSpec& spec, std::uint64_t init_seed) {
  return MlpProblem(std::move(data), spec, init_seed);
}

}  // namespace sofim::problems
