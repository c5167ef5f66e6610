#include "cpoptnet/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cpoptnet {

void TensorSpec::validate() const {
  if (n_clients < 1 || n_labels < 1 || n_slices < 1)
    throw ArgumentError("TensorSpec: dimensions must be positive");
}

CsvSchema read_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("schema " + path + ": " + e.what());
  }
  CsvSchema s;
  try {
    s.client_column = j.at("client_column").get<std::string>();
    s.date_column = j.at("date_column").get<std::string>();
    s.label_columns = j.at("labels").get<std::vector<std::string>>();
    if (j.contains("epoch")) {
      const auto epoch = j["epoch"].get<std::string>();
      if (std::sscanf(epoch.c_str(), "%d-%d", &s.epoch_year, &s.epoch_month) != 2)
        throw IoError("schema: epoch must be YYYY-MM");
    }
    if (j.contains("malformed_threshold"))
      s.malformed_threshold = j["malformed_threshold"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("schema " + path + ": " + e.what());
  }
  if (s.label_columns.empty()) throw IoError("schema: label list is empty");
  return s;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

// Accepts YYYY-MM or YYYY-MM-DD.
bool parse_month_index(const std::string& s, int epoch_year, int epoch_month,
                       Index& out) {
  int y, m;
  if (std::sscanf(s.c_str(), "%d-%d", &y, &m) != 2) return false;
  if (m < 1 || m > 12) return false;
  out = Index(y - epoch_year) * 12 + (m - epoch_month);
  return true;
}

}  // namespace

LoadReport load_records(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": missing header");

  const auto header = split_csv_line(line);
  auto find_col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ArgumentError(path + ": column '" + name + "' not in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t client_col = find_col(schema.client_column);
  const std::size_t date_col = find_col(schema.date_column);
  std::vector<std::size_t> label_cols;
  for (const auto& l : schema.label_columns) label_cols.push_back(find_col(l));

  LoadReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++report.rows_read;
    const auto fields = split_csv_line(line);
    Index month;
    if (fields.size() < header.size() ||
        !parse_month_index(fields[date_col], schema.epoch_year, schema.epoch_month,
                           month)) {
      ++report.rows_malformed;
      continue;
    }
    bool row_ok = true;
    std::vector<TransactionRecord> row_records;
    for (std::size_t l = 0; l < label_cols.size(); ++l) {
      const std::string& cell = fields[label_cols[l]];
      if (cell.empty()) continue;  // absent label
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || !std::isfinite(v) || v < 0) {
        row_ok = false;
        break;
      }
      if (v > 0)
        row_records.push_back({fields[client_col], Index(l), month, v});
    }
    if (!row_ok) {
      ++report.rows_malformed;
      continue;
    }
    for (auto& r : row_records) report.records.push_back(std::move(r));
  }

  if (report.rows_read > 0 &&
      double(report.rows_malformed) > schema.malformed_threshold * double(report.rows_read))
    throw IoError(path + ": " + std::to_string(report.rows_malformed) +
                  " malformed rows exceed threshold");
  return report;
}

std::map<std::string, Index> select_top_clients(
    const std::vector<TransactionRecord>& records, Index n) {
  if (n < 1) throw ArgumentError("select_top_clients: n must be >= 1");
  std::map<std::string, Index> counts;
  for (const auto& r : records) ++counts[r.client_id];
  if (static_cast<Index>(counts.size()) < n)
    throw ArgumentError("select_top_clients: fewer than " + std::to_string(n) +
                        " distinct clients");
  std::vector<std::pair<std::string, Index>> ranked(counts.begin(), counts.end());
  // Most records first; lexicographic id breaks ties.
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::map<std::string, Index> index;
  for (Index i = 0; i < n; ++i) index[ranked[i].first] = i;
  return index;
}

SparseTensor3 build_tensor(const std::vector<TransactionRecord>& records,
                           const TensorSpec& spec) {
  spec.validate();
  std::map<std::tuple<Index, Index, Index>, double> cells;
  for (const auto& r : records) {
    const auto it = spec.client_index.find(r.client_id);
    if (it == spec.client_index.end())
      throw ArgumentError("build_tensor: client '" + r.client_id +
                          "' not in the selected index");
    if (it->second >= spec.n_clients || r.label_index < 0 ||
        r.label_index >= spec.n_labels || r.month_index < 0 ||
        r.month_index >= spec.n_slices)
      throw ArgumentError("build_tensor: record outside spec bounds");
    cells[{it->second, r.label_index, r.month_index}] += r.value;
  }
  std::vector<CooEntry> entries;
  for (const auto& [key, v] : cells)
    if (v != 0.0)
      entries.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
  return SparseTensor3({spec.n_clients, spec.n_labels, spec.n_slices},
                       std::move(entries));
}

SynthResult synth_generate(Shape3 shape, Index true_rank, double noise_sigma,
                           double sparsity, std::uint64_t seed) {
  if (true_rank < 1) throw ArgumentError("synth_generate: true_rank must be >= 1");
  if (!(sparsity >= 0.0 && sparsity < 1.0))
    throw ArgumentError("synth_generate: sparsity must lie in [0, 1)");
  if (noise_sigma < 0) throw ArgumentError("synth_generate: noise_sigma must be >= 0");
  if (shape.I < 1 || shape.J < 1 || shape.K < 1)
    throw ArgumentError("synth_generate: dimensions must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix a(shape.I, true_rank), b(shape.J, true_rank), c(shape.K, true_rank);
  for (Matrix* m : {&a, &b})
    for (Index col = 0; col < true_rank; ++col)
      for (Index row = 0; row < m->rows(); ++row) (*m)(row, col) = unit(rng);

  // Time factor: sinusoidal columns (period 4 slices) interleaved with
  // gentle upward trends, all nonnegative.
  constexpr double period = 4.0;
  for (Index col = 0; col < true_rank; ++col) {
    if (col % 2 == 0) {
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      for (Index k = 0; k < shape.K; ++k)
        c(k, col) = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * double(k) / period +
                                         phase);
    } else {
      const double base = 0.2 + 0.6 * unit(rng);
      const double slope = 0.2 + 0.8 * unit(rng);
      for (Index k = 0; k < shape.K; ++k)
        c(k, col) = base + slope * double(k) / double(shape.K);
    }
  }

  KruskalTensor truth(a, b, c);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<CooEntry> entries;
  for (Index k = 0; k < shape.K; ++k)
    for (Index j = 0; j < shape.J; ++j)
      for (Index i = 0; i < shape.I; ++i) {
        double v = truth.latent(i, j, k);
        if (noise_sigma > 0) v += noise_sigma * gauss(rng);
        if (sparsity > 0 && unit(rng) < sparsity) continue;
        if (v != 0.0) entries.push_back({i, j, k, v});
      }
  return {SparseTensor3(shape, std::move(entries)), std::move(truth)};
}

}  // namespace cpoptnet
