#include <atomic>
#include <exception>
#include <thread>

#include "sofim/harness.hpp"

namespace sofim::harness {
namespace {

// -1 if a ranks above b, +1 if below, 0 if tied.
int compare(const MetricRow& a, const MetricRow& b) {
  const double acc_a = a.test_accuracy.value_or(0.0);
  const double acc_b = b.test_accuracy.value_or(0.0);
  if (acc_a != acc_b) return acc_a > acc_b ? -1 : 1;
  if (a.test_loss != b.test_loss) return a.test_loss < b.test_loss ? -1 : 1;
  if (a.train_loss != b.train_loss) return a.train_loss < b.train_loss ? -1 : 1;
  return 0;
}

}  // namespace

std::optional<std::size_t> select_best(std::span<const SweepPoint> points) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const RunRecord& r = points[i].record;
    if (r.diverged || r.rows.empty()) continue;
    if (!best || compare(r.rows.back(), points[*best].record.rows.back()) < 0) best = i;
  }
  return best;
}

SweepResult sweep(std::span<const ExperimentConfig> grid, unsigned threads) {
  if (grid.empty()) throw ConfigError("grid", "sweep needs at least one point");
  for (const auto& cfg : grid) {
    cfg.validate();
    if (!(cfg.problem == grid.front().problem)) {
      throw ConfigError("problem", "all sweep points must share one problem");
    }
  }
  const auto problem = build_problem(grid.front().problem, grid.front().seed);

  SweepResult result;
  result.points.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) result.points[i].config = grid[i];

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(grid.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        result.points[i].record = run_experiment(grid[i], *problem);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(grid.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  result.best = select_best(result.points);
  return result;
}

}  // namespace sofim::harness
