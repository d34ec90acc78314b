#include "sofim/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

namespace sofim::problems {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

double parse_number(std::string_view cell, std::size_t line_no, std::size_t column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(line_no, "column " + std::to_string(column + 1) + ": '" + std::string(cell) +
                                  "' is not a number");
  }
  if (!std::isfinite(value)) {
    throw ParseError(line_no, "column " + std::to_string(column + 1) + ": non-finite value");
  }
  return value;
}

}  // namespace

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw PreconditionError("dataset: feature rows and labels differ in count");
  }
  if (!features.allFinite()) throw PreconditionError("dataset: non-finite feature value");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw PreconditionError("dataset: label out of range");
  }
  std::unordered_set<std::size_t> seen(train.begin(), train.end());
  for (std::size_t i : train) {
    if (i >= size()) throw PreconditionError("dataset: train index out of range");
  }
  for (std::size_t i : test) {
    if (i >= size()) throw PreconditionError("dataset: test index out of range");
    if (seen.count(i) != 0) throw PreconditionError("dataset: index in both splits");
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw PreconditionError("split fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

Dataset make_blobs(std::size_t n, std::size_t p, int num_classes, double spread, std::uint64_t seed) {
  if (num_classes < 2 || n < static_cast<std::size_t>(num_classes) || p < 1) {
    throw PreconditionError("make_blobs: need N >= C >= 2 and p >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  RowMatrix centers(num_classes, static_cast<Eigen::Index>(p));
  for (int c = 0; c < num_classes; ++c) {
    Vector dir(static_cast<Eigen::Index>(p));
    do {
      for (auto& x : dir) x = normal(rng);
    } while (dir.norm() == 0.0);
    centers.row(c) = spread * dir.normalized().transpose();
  }

  Dataset data;
  data.num_classes = num_classes;
  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    data.labels[i] = label;
    for (std::size_t j = 0; j < p; ++j) {
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          centers(label, static_cast<Eigen::Index>(j)) + normal(rng);
    }
  }
  std::tie(data.train, data.test) = split_indices(n, 0.8, seed + 0x9E3779B97F4A7C15ULL);
  return data;
}

Dataset load_csv_dataset(const std::filesystem::path& path, const std::string& label_column,
                         double split_fraction, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file '" + path.string() + "'");

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header_line = line;
      break;
    }
  }
  if (header_line.empty()) throw ParseError(line_no, "missing header row");
  // Strip a UTF-8 byte-order mark.
  if (header_line.rfind("\xEF\xBB\xBF", 0) == 0) header_line.erase(0, 3);
  header = split_commas(header_line);

  const auto label_it = std::find(header.begin(), header.end(), std::string_view(label_column));
  if (label_it == header.end()) {
    throw ParseError(line_no, "label column '" + label_column + "' not found in header");
  }
  const std::size_t label_idx = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t columns = header.size();
  if (columns < 2) throw ParseError(line_no, "need at least one feature column and a label column");

  std::vector<double> values;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != columns) {
      throw ParseError(line_no, "expected " + std::to_string(columns) + " cells, found " +
                                    std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < columns; ++c) {
      const double v = parse_number(cells[c], line_no, c);
      if (c == label_idx) {
        if (v != std::floor(v) || v < 0.0 || v > std::numeric_limits<int>::max()) {
          throw ParseError(line_no, "label '" + std::string(cells[c]) + "' is not a non-negative integer");
        }
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
  }
  if (labels.empty()) throw ParseError(line_no, "no data rows");

  const auto n = static_cast<Eigen::Index>(labels.size());
  const auto p = static_cast<Eigen::Index>(columns - 1);
  Dataset data;
  data.features = Eigen::Map<RowMatrix>(values.data(), n, p);
  data.labels = std::move(labels);
  data.num_classes = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  std::tie(data.train, data.test) = split_indices(data.labels.size(), split_fraction, seed);

  // Standardize with train statistics only.
  for (Eigen::Index j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t i : data.train) mean += data.features(static_cast<Eigen::Index>(i), j);
    const double count = static_cast<double>(std::max<std::size_t>(data.train.size(), 1));
    mean /= count;
    double var = 0.0;
    for (std::size_t i : data.train) {
      const double dlt = data.features(static_cast<Eigen::Index>(i), j) - mean;
      var += dlt * dlt;
    }
    var /= count;
    const double sd = std::sqrt(var);
    if (sd > 0.0) {
      data.features.col(j) = (data.features.col(j).array() - mean) / sd;
    } else {
      data.features.col(j).setZero();
    }
  }
  return data;
}

void write_csv_dataset(const Dataset& data, const std::filesystem::path& path,
                       const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file '" + path.string() + "'");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t j = 0; j < data.width(); ++j) out << 'x' << j << ',';
  out << label_column << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.width(); ++j) {
      out << data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << ',';
    }
    out << data.labels[i] << '\n';
  }
}

BatchSampler::BatchSampler(std::vector<std::size_t> pool, std::size_t batch_size, std::uint64_t seed)
    : order_(std::move(pool)), batch_size_(batch_size), seed_(seed) {
  if (order_.empty()) throw PreconditionError("BatchSampler: empty index pool");
  if (batch_size_ == 0) throw PreconditionError("BatchSampler: batch size must be >= 1");
  batch_size_ = std::min(batch_size_, order_.size());
  std::sort(order_.begin(), order_.end());
}

void BatchSampler::reshuffle() {
  // One generator per epoch keeps epoch k's permutation independent of how
  // earlier epochs were consumed.
  std::sort(order_.begin(), order_.end());
  std::mt19937_64 rng(seed_ + 0x632BE59BD9B4E019ULL * (epoch_ + 1));
  std::shuffle(order_.begin(), order_.end(), rng);
}

std::span<const std::size_t> BatchSampler::next() {
  if (!started_) {
    started_ = true;
    reshuffle();
  } else if (cursor_ >= order_.size()) {
    ++epoch_;
    cursor_ = 0;
    reshuffle();
  }
  const std::size_t len = std::min(batch_size_, order_.size() - cursor_);
  std::span<const std::size_t> batch(order_.data() + cursor_, len);
  cursor_ += len;
  return batch;
}

}  // namespace sofim::problems
