#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sofim/common.hpp"
#include "sofim/core.hpp"
#include "sofim/problems.hpp"

namespace sofim::harness {

enum class OptimizerId { kSofim, kSgdMomentum, kAdam, kNgdOracle, kNewtonOracle };

std::string to_string(OptimizerId id);
/// Accepts "sofim", "sgd_momentum", "adam", "ngd_oracle", "newton_oracle".
OptimizerId parse_optimizer_id(const std::string& name);

struct DatasetSpec {
  enum class Kind { kBlobs, kCsv };
  Kind kind = Kind::kBlobs;
  // blobs
  std::size_t samples = 2000;
  std::size_t features = 20;
  int classes = 2;
  double spread = 5.0;
  std::uint64_t seed = 1;
  // csv
  std::string path;
  std::string label_column = "label";
  double train_fraction = 0.8;

  bool operator==(const DatasetSpec&) const = default;
};

struct ProblemSpec {
  enum class Kind { kQuadratic, kLogistic, kSoftmax, kMlp };
  Kind kind = Kind::kLogistic;
  // quadratic
  Eigen::Index dim = 20;
  double condition_number = 10.0;
  std::uint64_t quadratic_seed = 1;
  // classifiers
  DatasetSpec data;
  // mlp
  std::size_t hidden = 32;
  problems::Activation activation = problems::Activation::kTanh;

  bool operator==(const ProblemSpec&) const = default;
};

std::string to_string(ProblemSpec::Kind kind);

/// Flat hyperparameter set; each optimizer reads the fields it uses.
struct OptimizerSpec {
  OptimizerId id = OptimizerId::kSofim;
  double eta = 0.1;
  // sofim
  double rho = 0.5;
  double beta = 0.9;
  // sgd_momentum
  double momentum = 0.9;
  double weight_decay = 1e-6;
  bool cosine_schedule = true;  // annealed over total_iterations
  // adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // ngd_oracle
  double damping = 1e-3;

  bool operator==(const OptimizerSpec&) const = default;
};

struct ExperimentConfig {
  ProblemSpec problem;
  OptimizerSpec optimizer;
  std::size_t batch_size = 512;  // clipped to the train split
  std::int64_t total_iterations = 1000;
  std::int64_t eval_every = 10;
  std::uint64_t seed = 0;  // model initialization and batch order
  std::vector<double> loss_thresholds;  // train-loss targets for the summary

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Every field of the config in a fixed order; equal configs give equal strings.
std::string canonical_string(const ExperimentConfig& cfg);
/// 16 hex digits of FNV-1a over canonical_string.
std::string config_hash(const ExperimentConfig& cfg);

/// Builds the problem a config describes. MLP weights are initialized from `init_seed`.
std::shared_ptr<const problems::Problem> build_problem(const ProblemSpec& spec, std::uint64_t init_seed);

struct MetricRow {
  std::int64_t iteration = 0;
  std::int64_t epoch = 0;
  double batch_loss = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::optional<double> test_accuracy;  // absent for unlabeled problems
  double wall_ms = 0.0;
};

struct ThresholdHit {
  double threshold = 0.0;
  std::optional<std::int64_t> iteration;  // first evaluated iteration with train_loss <= threshold
};

struct RunRecord {
  std::string problem;
  OptimizerId optimizer = OptimizerId::kSofim;
  std::vector<MetricRow> rows;
  bool diverged = false;
  std::int64_t diverged_at = 0;
  std::string divergence_reason;
  std::optional<double> best_test_accuracy;
  std::vector<ThresholdHit> threshold_hits;

  const MetricRow* final_row() const noexcept { return rows.empty() ? nullptr : &rows.back(); }
};

/// Losses above this are treated as divergence.
inline constexpr double kDivergenceLoss = 1e8;

/// First evaluated iteration at which train loss <= threshold.
std::optional<std::int64_t> iterations_to_reach(const RunRecord& record, double threshold);

/// Mini-batch training loop. Metrics are evaluated on the full train and test
/// splits every eval_every iterations. Wall time accumulates over the
/// training iterations (batch loss, gradient, update) and excludes evaluation.
RunRecord run_experiment(const ExperimentConfig& cfg);
/// Same, on an already-built problem (shared read-only across runs).
RunRecord run_experiment(const ExperimentConfig& cfg, const problems::Problem& problem);

struct SweepPoint {
  ExperimentConfig config;
  RunRecord record;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::optional<std::size_t> best;  // nullopt when every point diverged
};

/// Highest final test accuracy, then lowest final test loss, then lowest final
/// train loss; earlier points win exact ties. Diverged or empty runs never win.
std::optional<std::size_t> select_best(std::span<const SweepPoint> points);

/// Runs every grid point on one shared problem (built with the first point's
/// seed) and selects the best. `threads` > 1 runs points concurrently.
SweepResult sweep(std::span<const ExperimentConfig> grid, unsigned threads = 1);

struct ScalingRow {
  Eigen::Index dim = 0;
  double median_step_ns = 0.0;
};

/// Median wall time of one optimizer update (gradient excluded) per dimension.
/// Gradients come from the separable quadratic 1/2 |w - w*|^2; the dense
/// oracles use make_quadratic and refuse d above the dense cap.
std::vector<ScalingRow> scaling_probe(OptimizerId id, std::span<const Eigen::Index> dims, int repeats,
                                      const OptimizerSpec& hyper = {});

// CSV and summary output -----------------------------------------------------

inline constexpr const char* kCsvHeader = "iteration,epoch,batch_loss,train_loss,test_loss,test_accuracy,wall_ms";

std::string to_csv(const RunRecord& record);
/// key = value lines.
std::string to_summary(const RunRecord& record, const ExperimentConfig& cfg);
/// `<problem>_<optimizer>_<hash>`.
std::string output_stem(const ExperimentConfig& cfg);

struct WrittenRun {
  std::filesystem::path csv;
  std::filesystem::path summary;
};
WrittenRun write_run(const RunRecord& record, const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace sofim::harness
