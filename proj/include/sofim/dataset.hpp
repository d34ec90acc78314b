#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sofim/common.hpp"

namespace sofim::problems {

/// Labelled feature matrix with a train/test index partition.
struct Dataset {
  RowMatrix features;  // N x p, one sample per row
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(features.cols()); }

  /// Throws PreconditionError if a row is non-finite, a label is out of
  /// range, or an index appears in both splits.
  void validate() const;
};

/// Seeded shuffle of 0..n-1; the first round(n * train_fraction) go to train.
/// Both halves are returned in ascending order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed);

/// C Gaussian clusters (unit noise) around random unit-norm centers scaled by
/// `spread`. Sample i has label i % C; 80/20 seeded split.
Dataset make_blobs(std::size_t n, std::size_t p, int num_classes, double spread, std::uint64_t seed);

/// Reads a comma-separated file with a header row. Every column other than
/// `label_column` is a feature. Features are standardized with train-split
/// statistics; constant columns become 0.
Dataset load_csv_dataset(const std::filesystem::path& path, const std::string& label_column,
                         double split_fraction, std::uint64_t seed);

/// Writes raw features as columns x0..x{p-1} followed by `label_column`.
void write_csv_dataset(const Dataset& data, const std::filesystem::path& path,
                       const std::string& label_column = "label");

/// Mini-batches drawn without replacement: each epoch is a fresh seeded
/// permutation of the index pool consumed in contiguous chunks. The last
/// chunk of an epoch may be short.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> pool, std::size_t batch_size, std::uint64_t seed);

  /// Next batch. The span stays valid until the following call.
  std::span<const std::size_t> next();

  /// Epoch of the batch most recently returned by next(); 0 before the first call.
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch_size() const noexcept { return batch_size_; }

 private:
  void reshuffle();

  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  bool started_ = false;
  std::uint64_t seed_;
};

}  // namespace sofim::problems
