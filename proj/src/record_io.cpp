#include <cstdio>
#include <fstream>
#include <sstream>

#include "sofim/harness.hpp"

namespace sofim::harness {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

std::string to_csv(const RunRecord& record) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  char wall[32];
  for (const MetricRow& r : record.rows) {
    std::snprintf(wall, sizeof(wall), "%.3f", r.wall_ms);
    os << r.iteration << ',' << r.epoch << ',' << num(r.batch_loss) << ',' << num(r.train_loss) << ','
       << num(r.test_loss) << ',' << (r.test_accuracy ? num(*r.test_accuracy) : std::string()) << ',' << wall
       << '\n';
  }
  return os.str();
}

std::string to_summary(const RunRecord& record, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "problem = " << record.problem << '\n'
     << "optimizer = " << to_string(record.optimizer) << '\n'
     << "config_hash = " << config_hash(cfg) << '\n'
     << "diverged = " << (record.diverged ? "true" : "false") << '\n';
  if (record.diverged) {
    os << "diverged_at = " << record.diverged_at << '\n' << "divergence_reason = " << record.divergence_reason << '\n';
  }
  os << "rows = " << record.rows.size() << '\n';
  if (const MetricRow* last = record.final_row()) {
    os << "final_iteration = " << last->iteration << '\n'
       << "final_train_loss = " << num(last->train_loss) << '\n'
       << "final_test_loss = " << num(last->test_loss) << '\n';
    if (last->test_accuracy) os << "final_test_accuracy = " << num(*last->test_accuracy) << '\n';
  }
  if (record.best_test_accuracy) os << "best_test_accuracy = " << num(*record.best_test_accuracy) << '\n';
  for (const ThresholdHit& hit : record.threshold_hits) {
    os << "iterations_to_train_loss[" << num(hit.threshold) << "] = "
       << (hit.iteration ? std::to_string(*hit.iteration) : std::string("never")) << '\n';
  }
  return os.str();
}

std::string output_stem(const ExperimentConfig& cfg) {
  return to_string(cfg.problem.kind) + "_" + to_string(cfg.optimizer.id) + "_" + config_hash(cfg);
}

WrittenRun write_run(const RunRecord& record, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string stem = output_stem(cfg);
  WrittenRun out{dir / (stem + ".csv"), dir / (stem + ".summary.txt")};
  write_file(out.csv, to_csv(record));
  write_file(out.summary, to_summary(record, cfg));
  return out;
}

}  // namespace sofim::harness
