#include <algorithm>
#include <chrono>
#include <random>

#include "sofim/baselines.hpp"
#include "sofim/harness.hpp"

namespace sofim::harness {
namespace {

// Updates per timed block, so small dimensions are not dominated by clock overhead.
int inner_steps(Eigen::Index d) { return static_cast<int>(std::max<Eigen::Index>(1, (Eigen::Index{1} << 20) / d)); }

template <class Step>
double median_block_ns(Eigen::Index d, int repeats, Vector& w, const Vector& w_star, Step&& step) {
  using Clock = std::chrono::steady_clock;
  const int inner = inner_steps(d);
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(repeats));
  Vector g(d);
  // One untimed warm-up block.
  for (int r = -1; r < repeats; ++r) {
    g = w - w_star;
    const auto start = Clock::now();
    for (int k = 0; k < inner; ++k) step(w, g);
    const auto stop = Clock::now();
    if (r >= 0) samples.push_back(std::chrono::duration<double, std::nano>(stop - start).count() / inner);
  }
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2), samples.end());
  return samples[samples.size() / 2];
}

}  // namespace

std::vector<ScalingRow> scaling_probe(OptimizerId id, std::span<const Eigen::Index> dims, int repeats,
                                      const OptimizerSpec& hyper) {
  if (repeats < 1) throw PreconditionError("scaling_probe: repeats must be >= 1");
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] < 1 || (i > 0 && dims[i] <= dims[i - 1])) {
      throw PreconditionError("scaling_probe: dims must be positive and strictly increasing");
    }
  }
  if (id == OptimizerId::kNgdOracle || id == OptimizerId::kNewtonOracle) {
    for (Eigen::Index d : dims) {
      if (d > baselines::kDefaultDenseCap) {
        throw PreconditionError("scaling_probe: " + to_string(id) + " refuses d = " + std::to_string(d) +
                                " above the dense cap " + std::to_string(baselines::kDefaultDenseCap));
      }
    }
  }

  std::vector<ScalingRow> rows;
  for (Eigen::Index d : dims) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(d));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector w(d);
    Vector w_star(d);
    for (auto& x : w) x = normal(rng);
    for (auto& x : w_star) x = normal(rng);

    double ns = 0.0;
    switch (id) {
      case OptimizerId::kSofim: {
        SofimOptimizer opt(d, SofimConfig{hyper.eta, hyper.rho, hyper.beta});
        ns = median_block_ns(d, repeats, w, w_star, [&](Vector& x, const Vector& g) { opt.step(x, g); });
        break;
      }
      case OptimizerId::kSgdMomentum: {
        baselines::SgdMomentumOptimizer opt(d, {hyper.eta, hyper.momentum, hyper.weight_decay, {}});
        ns = median_block_ns(d, repeats, w, w_star, [&](Vector& x, const Vector& g) { opt.step(x, g); });
        break;
      }
      case OptimizerId::kAdam: {
        baselines::AdamOptimizer opt(d, {hyper.eta, hyper.beta1, hyper.beta2, hyper.epsilon});
        ns = median_block_ns(d, repeats, w, w_star, [&](Vector& x, const Vector& g) { opt.step(x, g); });
        break;
      }
      case OptimizerId::kNgdOracle: {
        ns = median_block_ns(d, repeats, w, w_star, [&](Vector& x, const Vector& g) {
          const GradientVector one[] = {g};
          x = baselines::ngd_step(x, one, hyper.eta, hyper.damping);
        });
        break;
      }
      case OptimizerId::kNewtonOracle: {
        const auto q = problems::make_quadratic(d, 10.0, static_cast<std::uint64_t>(d));
        ns = median_block_ns(d, repeats, w, w_star,
                             [&](Vector& x, const Vector&) { x = baselines::newton_step_quadratic(x, q, hyper.eta); });
        break;
      }
    }
    rows.push_back({d, ns});
  }
  return rows;
}

}  // namespace sofim::harness
