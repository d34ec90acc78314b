#include "sofim/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sofim/baselines.hpp"
#include "sofim/gradcheck.hpp"

namespace sofim::cli {
namespace {

using harness::ExperimentConfig;
using harness::RunRecord;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
};

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

void add_common(CLI::App* sub, CommonOptions& opts, bool config_required) {
  auto* config = sub->add_option("-c,--config", opts.config_path, "Experiment config file (JSON)");
  if (config_required) config->required();
  sub->add_option("--set", opts.overrides, "Override a config key: dotted.key=value (repeatable)");
  sub->add_option("-o,--output-dir", opts.output_dir, "Output directory (overrides output_dir)");
}

CliConfig resolve(const CommonOptions& opts) {
  CliConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = load_config(opts.config_path, opts.overrides);
  } else {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& o : opts.overrides) apply_override(doc, o);
    cfg = from_json(doc);
  }
  if (!opts.output_dir.empty()) {
    cfg.output_dir = opts.output_dir;
  } else if (cfg.output_dir.empty()) {
    const char* env = std::getenv(kOutputDirEnv);
    cfg.output_dir = (env != nullptr && *env != '\0') ? env : kDefaultOutputDir;
  }
  return cfg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

void echo_config(const CliConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / kEffectiveConfigName, to_json(cfg).dump(2) + "\n");
}

void print_run(std::ostream& out, const RunRecord& record, const harness::WrittenRun& files) {
  out << files.csv.string() << ": ";
  if (const auto* last = record.final_row()) {
    out << "iteration " << last->iteration << ", train loss " << num(last->train_loss) << ", test loss "
        << num(last->test_loss);
    if (last->test_accuracy) out << ", test accuracy " << num(*last->test_accuracy);
  } else {
    out << "no metric rows";
  }
  if (record.diverged) out << " (diverged at iteration " << record.diverged_at << ")";
  out << '\n';
}

int cmd_run(const CommonOptions& opts, std::ostream& out) {
  const CliConfig cfg = resolve(opts);
  cfg.experiment.validate();
  echo_config(cfg);
  const RunRecord record = harness::run_experiment(cfg.experiment);
  const auto files = harness::write_run(record, cfg.experiment, cfg.output_dir);
  print_run(out, record, files);
  return 0;
}

std::string describe_point(const ExperimentConfig& c, const std::vector<std::string>& names) {
  std::ostringstream os;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& o = c.optimizer;
    const std::string& n = names[i];
    double v = n == "eta" ? o.eta : n == "rho" ? o.rho : n == "beta" ? o.beta : n == "momentum" ? o.momentum
             : n == "weight_decay" ? o.weight_decay : n == "beta1" ? o.beta1 : n == "beta2" ? o.beta2
             : n == "epsilon" ? o.epsilon : o.damping;
    os << (i ? " " : "") << n << "=" << std::setprecision(17) << v;
  }
  return os.str();
}

// Runs a grid, writes one CSV + summary per point and a sweep summary file.
int run_grid(const CliConfig& cfg, const std::vector<ExperimentConfig>& grid,
             const std::vector<std::string>& names, const std::string& summary_name, std::ostream& out,
             const std::string& best_key) {
  for (const auto& point : grid) point.validate();
  echo_config(cfg);
  const harness::SweepResult result = harness::sweep(grid, cfg.threads);

  std::ostringstream summary;
  summary << "points = " << result.points.size() << '\n';
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const auto& point = result.points[i];
    const auto files = harness::write_run(point.record, point.config, cfg.output_dir);
    print_run(out, point.record, files);
    summary << "point[" << i << "] = " << harness::output_stem(point.config) << ' '
            << describe_point(point.config, names);
    if (const auto* last = point.record.final_row()) {
      summary << " final_train_loss=" << std::setprecision(17) << last->train_loss
              << " final_test_loss=" << last->test_loss;
      if (last->test_accuracy) summary << " final_test_accuracy=" << *last->test_accuracy;
    }
    if (point.record.diverged) summary << " diverged_at=" << point.record.diverged_at;
    summary << '\n';
  }
  if (result.best) {
    const auto& best = result.points[*result.best];
    summary << "best = " << harness::output_stem(best.config) << '\n';
    summary << best_key << " = " << describe_point(best.config, names) << '\n';
    out << "best: " << describe_point(best.config, names) << '\n';
  } else {
    summary << "best = none\n" << best_key << " = none\n";
    out << "best: none (every point diverged)\n";
  }
  write_text(cfg.output_dir / summary_name, summary.str());
  return 0;
}

int cmd_sweep(const CommonOptions& opts, std::ostream& out) {
  const CliConfig cfg = resolve(opts);
  cfg.experiment.validate();
  std::vector<std::string> names;
  for (const auto& [name, values] : cfg.grid) names.push_back(name);
  return run_grid(cfg, expand_grid(cfg), names, "sweep_summary.txt", out, "best_point");
}

int cmd_rho_sweep(const CommonOptions& opts, std::ostream& out) {
  CliConfig cfg = resolve(opts);
  cfg.experiment.optimizer.id = harness::OptimizerId::kSofim;
  cfg.experiment.validate();
  std::vector<ExperimentConfig> grid;
  for (double rho : cfg.rho_grid) {
    ExperimentConfig c = cfg.experiment;
    c.optimizer.rho = rho;
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("rho_grid", e.message());
    }
    grid.push_back(c);
  }
  // The echoed config must reproduce this run, so record the forced optimizer.
  return run_grid(cfg, grid, {"rho"}, "rho_sweep_summary.txt", out, "best_rho");
}

int cmd_scaling(const CommonOptions& opts, std::ostream& out) {
  const CliConfig cfg = resolve(opts);
  for (auto id : cfg.scaling.optimizers) {
    if (id == harness::OptimizerId::kNgdOracle || id == harness::OptimizerId::kNewtonOracle) {
      for (auto d : cfg.scaling.dims) {
        if (d > baselines::kDefaultDenseCap) {
          throw ConfigError("scaling.dims", harness::to_string(id) + " refuses d = " + std::to_string(d) +
                                                " above the dense cap " +
                                                std::to_string(baselines::kDefaultDenseCap));
        }
      }
    }
  }
  echo_config(cfg);
  std::ostringstream csv;
  csv << "optimizer,dim,median_step_ns\n";
  for (auto id : cfg.scaling.optimizers) {
    const auto rows = harness::scaling_probe(id, cfg.scaling.dims, cfg.scaling.repeats, cfg.experiment.optimizer);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      csv << harness::to_string(id) << ',' << rows[i].dim << ',' << std::setprecision(6) << rows[i].median_step_ns
          << '\n';
      out << std::left << std::setw(14) << harness::to_string(id) << " d=" << std::setw(9) << rows[i].dim
          << " median " << std::setprecision(4) << rows[i].median_step_ns << " ns";
      if (i > 0) out << "  ratio " << std::setprecision(3) << rows[i].median_step_ns / rows[i - 1].median_step_ns;
      out << '\n';
    }
  }
  write_text(cfg.output_dir / "scaling.csv", csv.str());
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int points, std::ostream& out) {
  const auto results = problems::run_gradient_checks(seed, points);
  bool ok = true;
  for (const auto& r : results) {
    out << std::left << std::setw(10) << r.problem << " max relative error " << std::scientific
        << std::setprecision(3) << r.max_relative_error << "  tolerance " << r.tolerance << "  "
        << (r.passed() ? "ok" : "FAILED") << std::defaultfloat << '\n';
    ok = ok && r.passed();
  }
  return ok ? 0 : 2;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic optimization with a rank-one regularized Fisher matrix", "sofim"};
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts, rho_opts, scaling_opts;
  add_common(app.add_subcommand("run", "Run one experiment"), run_opts, true);
  add_common(app.add_subcommand("sweep", "Run a hyperparameter grid and pick the best point"), sweep_opts, true);
  add_common(app.add_subcommand("rho-sweep", "Run SOFIM over rho_grid"), rho_opts, true);
  add_common(app.add_subcommand("scaling", "Measure per-step optimizer time against dimension"), scaling_opts,
             false);
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every problem's gradient");
  std::uint64_t seed = 7;
  int points = 20;
  gradcheck->add_option("--seed", seed, "Random seed");
  gradcheck->add_option("--points", points, "Random points per problem")->check(CLI::PositiveNumber);

  std::vector<std::string> storage{"sofim"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (app.got_subcommand("run")) return cmd_run(run_opts, out);
    if (app.got_subcommand("sweep")) return cmd_sweep(sweep_opts, out);
    if (app.got_subcommand("rho-sweep")) return cmd_rho_sweep(rho_opts, out);
    if (app.got_subcommand("scaling")) return cmd_scaling(scaling_opts, out);
    return cmd_gradcheck(seed, points, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace sofim::cli
