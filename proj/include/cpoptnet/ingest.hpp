#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cpoptnet/tensor.hpp"

namespace cpoptnet {

struct TransactionRecord {
  std::string client_id;
  Index label_index;  // into the configured vocabulary
  Index month_index;  // slices from the configured epoch
  double value;       // nonnegative count or ownership flag
};

struct TensorSpec {
  Index n_clients = 200;
  Index n_labels = 22;
  Index n_slices = 16;
  std::map<std::string, Index> client_index;
  std::vector<std::string> labels;
  int epoch_year = 2015;
  int epoch_month = 1;

  void validate() const;
};

// CSV column mapping: a client id column, a date column, and one binary
// column per transaction label.
struct CsvSchema {
  std::string client_column;
  std::string date_column;
  std::vector<std::string> label_columns;
  int epoch_year = 2015;
  int epoch_month = 1;
  double malformed_threshold = 0.01;  // fraction of rows allowed to fail
};

// JSON config: {"client_column": ..., "date_column": ..., "labels": [...],
//               "epoch": "YYYY-MM", "malformed_threshold": ...}
CsvSchema read_schema_file(const std::string& path);

struct LoadReport {
  std::vector<TransactionRecord> records;
  Index rows_read = 0;
  Index rows_malformed = 0;
};

// One record per (row, active label). Malformed rows are counted and
// skipped; exceeding the threshold is an error.
LoadReport load_records(const std::string& path, const CsvSchema& schema);

// The n clients with the most records, ties broken by lexicographic id.
std::map<std::string, Index> select_top_clients(
    const std::vector<TransactionRecord>& records, Index n);

SparseTensor3 build_tensor(const std::vector<TransactionRecord>& records,
                           const TensorSpec& spec);

struct SynthResult {
  SparseTensor3 observed;
  KruskalTensor truth;
};

// Low-rank ground truth with nonnegative factors and a seasonal time
// factor (sinusoidal columns of period 4 interleaved with trend columns),
// plus Gaussian noise and uniform cell dropout.
SynthResult synth_generate(Shape3 shape, Index true_rank, double noise_sigma,
                           double sparsity, std::uint64_t seed);

}  // namespace cpoptnet
