#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sofim/harness.hpp"

namespace sofim::cli {

struct ScalingSettings {
  // Doublings from 1e3 to ~1e6.
  std::vector<Eigen::Index> dims{1000, 2000, 4000, 8000, 16000, 32000, 64000, 128000, 256000, 512000, 1024000};
  int repeats = 15;
  std::vector<harness::OptimizerId> optimizers{harness::OptimizerId::kSofim, harness::OptimizerId::kSgdMomentum};
};

/// Everything a config file can say. Missing keys keep these defaults.
struct CliConfig {
  harness::ExperimentConfig experiment;
  std::filesystem::path output_dir;
  /// Hyperparameter name -> values; the sweep runs the cartesian product.
  std::vector<std::pair<std::string, std::vector<double>>> grid{{"eta", {1.0, 0.1, 0.01, 0.001, 0.0001}}};
  std::vector<double> rho_grid{1.0, 0.5, 0.1};
  ScalingSettings scaling;
  unsigned threads = 1;
};

/// Environment variable consulted when neither the config nor a flag sets output_dir.
inline constexpr const char* kOutputDirEnv = "SOFIM_OUTPUT_DIR";
inline constexpr const char* kDefaultOutputDir = "sofim_runs";
inline constexpr const char* kEffectiveConfigName = "effective_config.json";

/// Strict conversion: unknown keys and wrong types throw ConfigError naming the dotted key.
CliConfig from_json(const nlohmann::json& j);
/// Complete config including defaults; from_json(to_json(c)) reproduces c.
nlohmann::json to_json(const CliConfig& cfg);

/// Applies "dotted.key=value" to a raw config document. The value is read as
/// JSON when it parses (numbers, true/false, arrays), otherwise as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads a JSON config file, applies overrides in order, converts.
CliConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

/// Sets one named hyperparameter (eta, rho, beta, momentum, ...).
void set_hyperparameter(harness::OptimizerSpec& spec, const std::string& name, double value);

/// The grid points a `sweep` runs: cartesian product of cfg.grid over cfg.experiment.
std::vector<harness::ExperimentConfig> expand_grid(const CliConfig& cfg);

/// Entry point shared by the executable and the tests. Exit codes: 0 success,
/// 1 configuration or usage error, 2 runtime failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sofim::cli
